#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

namespace drsafe {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Axis-aligned closed box. Used for the safe region A and for disturbance supports.
class Box {
public:
    Box() = default;
    Box(Vector lo, Vector hi);
    static Box interval(double lo, double hi);

    std::size_t dim() const { return static_cast<std::size_t>(lo_.size()); }
    const Vector& lo() const { return lo_; }
    const Vector& hi() const { return hi_; }
    double lo(std::size_t i) const { return lo_[static_cast<Eigen::Index>(i)]; }
    double hi(std::size_t i) const { return hi_[static_cast<Eigen::Index>(i)]; }

    /// Boundary points are members.
    bool contains(const Vector& x) const;
    bool contains(const double* x) const;
    Vector midpoint() const { return 0.5 * (lo_ + hi_); }

    /// All 2^dim corners, lowest-first in lexicographic order.
    std::vector<Vector> corners() const;

private:
    Vector lo_;
    Vector hi_;
};

using SafeRegion = Box;

/// x' = A_x x + B_u u + c + G_w w
struct AffineDescriptor {
    Matrix state_matrix;
    Matrix control_matrix;
    Vector offset;
    Matrix disturbance_matrix;

    Vector apply(const Vector& x, const Vector& u, const Vector& w) const;
};

class Dynamics {
public:
    using Transition = std::function<Vector(const Vector& x, const Vector& u, const Vector& w)>;

    Dynamics(std::size_t state_dim, std::size_t control_dim, std::size_t disturbance_dim,
             Transition transition, std::optional<AffineDescriptor> affine = std::nullopt);

    /// Dynamics whose transition is the affine formula itself.
    static Dynamics affine(AffineDescriptor descriptor);

    std::size_t state_dim() const { return state_dim_; }
    std::size_t control_dim() const { return control_dim_; }
    std::size_t disturbance_dim() const { return disturbance_dim_; }
    const std::optional<AffineDescriptor>& affine_descriptor() const { return affine_; }

    /// Throws ConfigurationError on dimension mismatch.
    Vector step(const Vector& x, const Vector& u, const Vector& w) const;

private:
    std::size_t state_dim_;
    std::size_t control_dim_;
    std::size_t disturbance_dim_;
    Transition transition_;
    std::optional<AffineDescriptor> affine_;
};

/// Finite list of admissible control vectors with an optional state-dependent filter.
class ControlSet {
public:
    using Predicate = std::function<bool(const Vector& x, std::size_t control_index)>;

    explicit ControlSet(std::vector<Vector> controls, Predicate admissible = {});

    std::size_t size() const { return controls_.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(controls_.front().size()); }
    const Vector& operator[](std::size_t i) const { return controls_[i]; }
    const std::vector<Vector>& controls() const { return controls_; }

    bool admissible(const Vector& x, std::size_t index) const;
    std::vector<std::size_t> admissible_indices(const Vector& x) const;
    bool has_predicate() const { return static_cast<bool>(predicate_); }

private:
    std::vector<Vector> controls_;
    Predicate predicate_;
};

struct Model {
    Dynamics dynamics;
    SafeRegion safe_region;
    ControlSet controls;
    std::size_t horizon = 0;
};

/// Parameters of the scalar thermostatically controlled load
///   x' = a x + (1 - a)(theta - eta R P u) + w,   a = exp(-h / (C R)).
struct TclParameters {
    double resistance = 2.0;     // R, degC/kW
    double capacitance = 2.0;    // C, kWh/degC
    double ambient = 32.0;       // theta, degC
    double step_hours = 5.0 / 60.0;
    double power = 14.0;         // P, kW
    double efficiency = 0.7;     // eta
    double safe_lo = 19.0;
    double safe_hi = 22.0;
    std::size_t horizon = 18;

    double decay() const;
};

/// Scalar TCL with ON/OFF control {0, 1}.
Model tcl_model(const TclParameters& params = {});

/// Default TCL benchmark: A = [19, 22], 18 five-minute stages.
Model tcl_preset();

} // namespace drsafe
