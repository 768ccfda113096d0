#include "drsafe/policy.hpp"

#include "drsafe/errors.hpp"

#include <algorithm>
#include <string>

namespace drsafe {

namespace {

// Grid indices of the cell vertices bracketing x along one axis: one index when
// x sits on a node, two otherwise, none when x is off the axis range.
std::vector<std::size_t> bracket(const std::vector<double>& axis, double x) {
    if (!(x >= axis.front() && x <= axis.back())) return {};
    const auto it = std::lower_bound(axis.begin(), axis.end(), x);
    const auto i = static_cast<std::size_t>(it - axis.begin());
    if (*it == x) return {i};
    return {i - 1, i};
}

std::vector<Vector> disturbance_probe(const Box& w) {
    const std::size_t l = w.dim();
    std::size_t total = 1;
    for (std::size_t d = 0; d < l; ++d) total *= 3;
    std::vector<Vector> out;
    out.reserve(total);
    for (std::size_t k = 0; k < total; ++k) {
        Vector p(static_cast<Eigen::Index>(l));
        std::size_t code = k;
        for (std::size_t d = l; d-- > 0;) {
            const std::size_t digit = code % 3;
            code /= 3;
            const double v = digit == 0 ? w.lo(d) : digit == 1 ? 0.5 * (w.lo(d) + w.hi(d)) : w.hi(d);
            p[static_cast<Eigen::Index>(d)] = v;
        }
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace

SafeSetFamily::SafeSetFamily(double alpha, std::shared_ptr<const StateGrid> grid,
                             std::vector<std::vector<std::uint8_t>> masks)
    : alpha_(alpha), grid_(std::move(grid)), masks_(std::move(masks)) {
    for (const auto& m : masks_) {
        if (m.size() != grid_->size()) throw ConfigurationError("safe set mask size does not match grid");
    }
}

bool SafeSetFamily::contains(std::size_t t, const Vector& x) const {
    const std::size_t n = grid_->dim();
    if (static_cast<std::size_t>(x.size()) != n) return false;
    std::vector<std::vector<std::size_t>> brackets(n);
    for (std::size_t d = 0; d < n; ++d) {
        brackets[d] = bracket(grid_->axis(d), x[static_cast<Eigen::Index>(d)]);
        if (brackets[d].empty()) return false;
    }
    std::vector<std::size_t> pick(n, 0), index(n);
    const auto& mask = masks_[t];
    while (true) {
        for (std::size_t d = 0; d < n; ++d) index[d] = brackets[d][pick[d]];
        if (!mask[grid_->flatten(index)]) return false;
        std::size_t d = n;
        while (d > 0) {
            --d;
            if (++pick[d] < brackets[d].size()) break;
            pick[d] = 0;
            if (d == 0) return true;
        }
        if (n == 0) return true;
    }
}

SafeSetFamily threshold(const std::vector<ValueFunction>& values, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw ConfigurationError("alpha must lie in (0, 1], got " + std::to_string(alpha));
    }
    if (values.empty()) throw ConfigurationError("threshold needs at least one value function");
    std::vector<std::vector<std::uint8_t>> masks;
    masks.reserve(values.size());
    for (const auto& v : values) {
        std::vector<std::uint8_t> m(v.values().size());
        for (std::size_t k = 0; k < m.size(); ++k) m[k] = v.values()[k] >= alpha ? 1 : 0;
        masks.push_back(std::move(m));
    }
    return SafeSetFamily(alpha, values.front().grid_ptr(), std::move(masks));
}

FallbackPolicy FallbackPolicy::constant(std::size_t control_index) {
    FallbackPolicy p;
    p.constant_ = control_index;
    return p;
}

FallbackPolicy FallbackPolicy::table(std::vector<std::vector<std::int32_t>> tables) {
    FallbackPolicy p;
    p.tables_ = std::move(tables);
    return p;
}

std::size_t FallbackPolicy::control(std::size_t t, std::size_t nearest_node) const {
    if (tables_.empty()) return constant_;
    const auto& row = tables_.size() == 1 ? tables_.front() : tables_.at(t);
    return static_cast<std::size_t>(row.at(nearest_node));
}

SafetyOrientedController::SafetyOrientedController(std::shared_ptr<const Model> model,
                                                   SafeSetFamily sets,
                                                   std::vector<std::vector<std::int32_t>> safe_policy,
                                                   FallbackPolicy fallback, std::vector<Box> supports)
    : model_(std::move(model)), sets_(std::move(sets)), safe_policy_(std::move(safe_policy)),
      fallback_(std::move(fallback)), supports_(std::move(supports)) {
    if (supports_.empty()) throw ConfigurationError("controller needs a disturbance support");
    if (supports_.size() != 1 && supports_.size() != safe_policy_.size()) {
        throw ConfigurationError("controller supports must be shared or one per stage");
    }
    if (sets_.stages() < safe_policy_.size() + 1) {
        throw ConfigurationError("controller needs safe sets for stages 0..T");
    }
    for (const auto& w : supports_) probes_.push_back(disturbance_probe(w));
}

std::size_t SafetyOrientedController::nearest_node(const Vector& x) const {
    const StateGrid& grid = sets_.grid();
    std::vector<std::size_t> index(grid.dim());
    for (std::size_t d = 0; d < grid.dim(); ++d) {
        const auto& axis = grid.axis(d);
        const double v = x[static_cast<Eigen::Index>(d)];
        if (!(v > axis.front())) {
            index[d] = 0;
            continue;
        }
        if (v >= axis.back()) {
            index[d] = axis.size() - 1;
            continue;
        }
        const auto it = std::lower_bound(axis.begin(), axis.end(), v);
        const auto hi = static_cast<std::size_t>(it - axis.begin());
        index[d] = (axis[hi] - v < v - axis[hi - 1]) ? hi : hi - 1;
    }
    return grid.flatten(index);
}

bool SafetyOrientedController::all_safe_next(const Vector& x, std::size_t t) const {
    const auto& controls = model_->controls;
    const auto& probe = probes_.size() == 1 ? probes_.front() : probes_[t];
    bool any = false;
    for (std::size_t u = 0; u < controls.size(); ++u) {
        if (!controls.admissible(x, u)) continue;
        any = true;
        for (const Vector& w : probe) {
            if (!sets_.contains(t + 1, model_->dynamics.step(x, controls[u], w))) return false;
        }
    }
    return any;
}

std::size_t SafetyOrientedController::safe_control(const Vector& x, std::size_t t) const {
    const auto& controls = model_->controls;
    const auto u = static_cast<std::size_t>(safe_policy_.at(t)[nearest_node(x)]);
    if (controls.admissible(x, u)) return u;
    const auto allowed = controls.admissible_indices(x);
    return allowed.empty() ? u : allowed.front();
}

Action SafetyOrientedController::act(const Vector& x, std::size_t t) const {
    if (all_safe_next(x, t)) {
        const std::size_t u = fallback_.control(t, nearest_node(x));
        if (u < model_->controls.size() && model_->controls.admissible(x, u)) {
            return {u, Branch::Fallback};
        }
        // every admissible control is safe here, so any of them may stand in
        return {model_->controls.admissible_indices(x).front(), Branch::Fallback};
    }
    return {safe_control(x, t), Branch::Safe};
}

} // namespace drsafe
