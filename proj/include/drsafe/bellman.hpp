#pragma once

#include "drsafe/ambiguity.hpp"
#include "drsafe/dual_sip.hpp"
#include "drsafe/model.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace drsafe {

/**
 * Tensor grid of uniformly spaced nodes on a bounding box containing the safe
 * region. Every face of the safe box must coincide with a grid line; node
 * coordinates on those lines are snapped to the exact face value, so membership
 * tests at boundary nodes never straddle.
 */
class StateGrid {
public:
    StateGrid(Vector lo, Vector hi, std::vector<std::size_t> nodes, const Box& safe_region);

    std::size_t dim() const { return axes_.size(); }
    std::size_t size() const { return size_; }
    std::size_t nodes(std::size_t d) const { return axes_[d].size(); }
    double spacing(std::size_t d) const { return spacing_[d]; }
    double coordinate(std::size_t d, std::size_t i) const { return axes_[d][i]; }
    const std::vector<double>& axis(std::size_t d) const { return axes_[d]; }
    const Box& bounds() const { return bounds_; }

    /// Row-major flat index (last dimension fastest).
    std::size_t flatten(std::span<const std::size_t> index) const;
    std::vector<std::size_t> unflatten(std::size_t flat) const;
    Vector node(std::size_t flat) const;

    /// Throws ConfigurationError if some one-step successor of the safe region
    /// under an affine model leaves the grid box.
    void check_envelope(const Model& model, std::span<const Box> supports) const;

private:
    std::vector<std::vector<double>> axes_;
    std::vector<double> spacing_;
    Box bounds_;
    std::size_t size_ = 0;
};

/// Worst-case safety probability v_t on a state grid: multilinear between
/// nodes inside the safe region, identically zero outside it.
class ValueFunction {
public:
    ValueFunction(std::size_t stage, std::shared_ptr<const StateGrid> grid, Box safe_region,
                  std::vector<double> values);

    std::size_t stage() const { return stage_; }
    const StateGrid& grid() const { return *grid_; }
    const std::shared_ptr<const StateGrid>& grid_ptr() const { return grid_; }
    const Box& safe_region() const { return safe_region_; }
    const std::vector<double>& values() const { return values_; }
    double node_value(std::size_t flat) const { return values_[flat]; }

    double operator()(const Vector& x) const { return at(x.data()); }
    double at(const double* x) const;
    /// Interpolant of the safe-region restriction with x clamped into the safe box.
    double inside(const double* x) const;

private:
    std::size_t stage_;
    std::shared_ptr<const StateGrid> grid_;
    Box safe_region_;
    std::vector<double> values_;
};

/// v_T = 1_A on the grid.
ValueFunction terminal(std::shared_ptr<const StateGrid> grid, const Box& safe_region,
                       std::size_t horizon);

/// Robust stages carry a moment ambiguity set; nominal stages a fixed distribution.
using StageUncertainty = std::variant<MomentAmbiguitySet, NominalDistribution>;

const Box& support_of(const StageUncertainty& u);

/// Exchange tolerance used by backups. Errors of order feas_tol per node would
/// swamp the 1e-8 nodewise orderings between stages and ambiguity levels.
inline sip::SipOptions bellman_sip_defaults() {
    sip::SipOptions o;
    o.feas_tol = 1e-9;
    return o;
}

struct BellmanOptions {
    sip::SipOptions sip = bellman_sip_defaults();
    /// Midpoint-rule atoms per dimension for nominal stages.
    std::size_t nominal_atoms = 256;
    std::size_t threads = 1;
};

/// v_next(f(x, u, w)) as a function of w. For scalar affine dynamics with a
/// scalar disturbance this is an exact piecewise-linear payoff.
sip::Payoff next_stage_payoff(const ValueFunction& v_next, const Model& model, const Vector& x,
                              const Vector& u, const Box& support);

struct BackupDiagnostics {
    std::size_t sip_calls = 0;
    std::size_t max_iterations = 0;
    std::size_t unconverged = 0;
};

struct BackupResult {
    ValueFunction value;
    /// Maximizing control index per node (lowest index on ties).
    std::vector<std::int32_t> policy;
    BackupDiagnostics diagnostics;
};

/**
 * One backward step v_t(x) = 1_A(x) max_u inf_mu E[v_next(f(x, u, w))].
 *
 * `allowed_controls`, when nonempty, restricts the maximization to those
 * control indices (intersected with the admissible set). Solver failures are
 * rethrown as SolverError annotated with the stage, node and control.
 */
BackupResult backup(const ValueFunction& v_next, const Model& model,
                    const StageUncertainty& uncertainty, const BellmanOptions& options,
                    std::span<const std::size_t> allowed_controls = {});

struct RecursionResult {
    /// values[t] for t = 0..T.
    std::vector<ValueFunction> values;
    /// policies[t] for t = 0..T-1.
    std::vector<std::vector<std::int32_t>> policies;
    std::vector<BackupDiagnostics> diagnostics;
};

/**
 * Backward recursion from v_T = 1_A. `schedule` holds either one entry shared by
 * all stages or one entry per stage t = 0..T-1. `first_stage_controls` optionally
 * pins the control set used at t = 0.
 */
RecursionResult solve_recursion(const Model& model, const std::vector<StageUncertainty>& schedule,
                                std::shared_ptr<const StateGrid> grid,
                                const BellmanOptions& options,
                                std::span<const std::size_t> first_stage_controls = {});

} // namespace drsafe
