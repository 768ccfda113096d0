#include "drsafe/model.hpp"

#include "drsafe/errors.hpp"

#include <cmath>
#include <string>

namespace drsafe {

Box::Box(Vector lo, Vector hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.size() != hi_.size() || lo_.size() == 0) {
        throw ConfigurationError("box bounds must be nonempty and of equal dimension");
    }
    for (Eigen::Index i = 0; i < lo_.size(); ++i) {
        if (!(lo_[i] <= hi_[i])) {
            throw ConfigurationError("box dimension " + std::to_string(i) + " has lo > hi");
        }
    }
}

Box Box::interval(double lo, double hi) {
    return Box(Vector::Constant(1, lo), Vector::Constant(1, hi));
}

bool Box::contains(const Vector& x) const {
    if (x.size() != lo_.size()) return false;
    return contains(x.data());
}

bool Box::contains(const double* x) const {
    for (Eigen::Index i = 0; i < lo_.size(); ++i) {
        if (x[i] < lo_[i] || x[i] > hi_[i]) return false;
    }
    return true;
}

std::vector<Vector> Box::corners() const {
    const std::size_t d = dim();
    std::vector<Vector> out;
    out.reserve(std::size_t{1} << d);
    for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
        Vector c(static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < d; ++i) {
            // most significant bit first so the list is lexicographic
            const bool high = (mask >> (d - 1 - i)) & 1U;
            c[static_cast<Eigen::Index>(i)] = high ? hi(i) : lo(i);
        }
        out.push_back(std::move(c));
    }
    return out;
}

Vector AffineDescriptor::apply(const Vector& x, const Vector& u, const Vector& w) const {
    return state_matrix * x + control_matrix * u + offset + disturbance_matrix * w;
}

Dynamics::Dynamics(std::size_t state_dim, std::size_t control_dim, std::size_t disturbance_dim,
                   Transition transition, std::optional<AffineDescriptor> affine)
    : state_dim_(state_dim), control_dim_(control_dim), disturbance_dim_(disturbance_dim),
      transition_(std::move(transition)), affine_(std::move(affine)) {
    if (state_dim_ == 0 || control_dim_ == 0 || disturbance_dim_ == 0) {
        throw ConfigurationError("dynamics dimensions must be positive");
    }
    if (!transition_) throw ConfigurationError("dynamics transition is empty");
    if (affine_) {
        const auto n = static_cast<Eigen::Index>(state_dim_);
        const auto m = static_cast<Eigen::Index>(control_dim_);
        const auto l = static_cast<Eigen::Index>(disturbance_dim_);
        const AffineDescriptor& a = *affine_;
        if (a.state_matrix.rows() != n || a.state_matrix.cols() != n ||
            a.control_matrix.rows() != n || a.control_matrix.cols() != m ||
            a.offset.size() != n || a.disturbance_matrix.rows() != n ||
            a.disturbance_matrix.cols() != l) {
            throw ConfigurationError("affine descriptor shape does not match dynamics dimensions");
        }
    }
}

Dynamics Dynamics::affine(AffineDescriptor descriptor) {
    const auto n = static_cast<std::size_t>(descriptor.state_matrix.rows());
    const auto m = static_cast<std::size_t>(descriptor.control_matrix.cols());
    const auto l = static_cast<std::size_t>(descriptor.disturbance_matrix.cols());
    AffineDescriptor copy = descriptor;
    return Dynamics(
        n, m, l,
        [copy](const Vector& x, const Vector& u, const Vector& w) { return copy.apply(x, u, w); },
        std::move(descriptor));
}

Vector Dynamics::step(const Vector& x, const Vector& u, const Vector& w) const {
    if (static_cast<std::size_t>(x.size()) != state_dim_ ||
        static_cast<std::size_t>(u.size()) != control_dim_ ||
        static_cast<std::size_t>(w.size()) != disturbance_dim_) {
        throw ConfigurationError("step: dimension mismatch (expected x:" +
                                 std::to_string(state_dim_) + " u:" +
                                 std::to_string(control_dim_) + " w:" +
                                 std::to_string(disturbance_dim_) + ")");
    }
    return transition_(x, u, w);
}

ControlSet::ControlSet(std::vector<Vector> controls, Predicate admissible)
    : controls_(std::move(controls)), predicate_(std::move(admissible)) {
    if (controls_.empty()) throw ConfigurationError("control set is empty");
    const auto m = controls_.front().size();
    if (m == 0) throw ConfigurationError("control vectors must be nonempty");
    for (const Vector& u : controls_) {
        if (u.size() != m) throw ConfigurationError("control vectors differ in dimension");
    }
}

bool ControlSet::admissible(const Vector& x, std::size_t index) const {
    if (index >= controls_.size()) return false;
    return !predicate_ || predicate_(x, index);
}

std::vector<std::size_t> ControlSet::admissible_indices(const Vector& x) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < controls_.size(); ++i) {
        if (admissible(x, i)) out.push_back(i);
    }
    return out;
}

double TclParameters::decay() const {
    return std::exp(-step_hours / (capacitance * resistance));
}

Model tcl_model(const TclParameters& p) {
    const double a = p.decay();
    const double gain = p.efficiency * p.resistance * p.power;

    AffineDescriptor d;
    d.state_matrix = Matrix::Constant(1, 1, a);
    d.control_matrix = Matrix::Constant(1, 1, -(1.0 - a) * gain);
    d.offset = Vector::Constant(1, (1.0 - a) * p.ambient);
    d.disturbance_matrix = Matrix::Constant(1, 1, 1.0);

    const double theta = p.ambient;
    Dynamics dyn(
        1, 1, 1,
        [a, theta, gain](const Vector& x, const Vector& u, const Vector& w) {
            return Vector::Constant(1, a * x[0] + (1.0 - a) * (theta - gain * u[0]) + w[0]);
        },
        std::move(d));

    ControlSet controls({Vector::Constant(1, 0.0), Vector::Constant(1, 1.0)});
    return Model{std::move(dyn), Box::interval(p.safe_lo, p.safe_hi), std::move(controls),
                 p.horizon};
}

Model tcl_preset() { return tcl_model(TclParameters{}); }

} // namespace drsafe
