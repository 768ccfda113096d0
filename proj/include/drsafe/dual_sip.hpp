#pragma once

#include "drsafe/ambiguity.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

/// Dual semi-infinite program for the worst-case expectation over a moment
/// ambiguity set, solved by an exchange (adaptive discretization) method:
///
///   max  -(b-m)'l_lo - (b+m)'l_hi - c tr(Sigma L) - nu
///   s.t. w'(l_hi - l_lo) + (w-m)'L(w-m) + nu + g(w) >= 0   for all w in W
///        l_lo, l_hi >= 0,  L diagonal >= 0
///
/// For l = 1 this equals the worst-case expectation of g. For l > 1 the
/// diagonal restriction on L yields a lower bound.
namespace drsafe::sip {

/// Linear piece of a one-dimensional payoff: intercept + slope * w on [lo, hi].
struct Segment {
    double lo = 0.0;
    double hi = 0.0;
    double slope = 0.0;
    double intercept = 0.0;

    double at(double w) const { return intercept + slope * w; }
};

/// Payoff g(w) with values in [0, 1].
///
/// A piecewise-linear payoff (l = 1) may jump at segment joints. The semi-infinite
/// constraint only sees its lower envelope, so `lower` takes the smaller one-sided
/// limit at a joint while `operator()` takes the larger one (the upper
/// semicontinuous value a sample at that point would observe).
class Payoff {
public:
    using Fn = std::function<double(std::span<const double>)>;

    /// Segments must tile [lo, hi] in increasing order.
    static Payoff piecewise_linear(std::vector<Segment> segments);
    static Payoff general(std::size_t dim, Fn fn);
    static Payoff constant(std::size_t dim, double value);

    std::size_t dim() const { return dim_; }
    bool is_piecewise_linear() const { return fn_ == nullptr; }
    const std::vector<Segment>& segments() const { return segments_; }

    double operator()(std::span<const double> w) const;
    double operator()(double w) const { return (*this)(std::span<const double>(&w, 1)); }
    double lower(std::span<const double> w) const;
    double lower(double w) const { return lower(std::span<const double>(&w, 1)); }

private:
    std::size_t dim_ = 1;
    std::vector<Segment> segments_;
    Fn fn_;
};

struct Multipliers {
    Vector lambda_lo;
    Vector lambda_hi;
    /// Diagonal of the second-moment multiplier.
    Vector Lambda;
    double nu = 0.0;

    static Multipliers zero(std::size_t dim);
    /// -(b-m)'l_lo - (b+m)'l_hi - c tr(Sigma L) - nu
    double objective(const MomentAmbiguitySet& amb) const;
    /// Constraint function without the payoff term.
    double affine_part(const MomentAmbiguitySet& amb, std::span<const double> w) const;
};

struct SipOptions {
    double feas_tol = 1e-7;
    std::size_t max_iterations = 100;
    /// Active points whose constraint slack exceeds this are dropped after each solve.
    double prune_slack = 1e-3;
    /// Scan resolution per dimension for payoffs without piecewise-linear structure.
    std::size_t scan_points = 2049;
    double point_tol = 1e-12;
};

struct DualCertificate {
    Multipliers multipliers;
    /// Objective after shifting nu to make the final constraint exactly feasible.
    double raw_objective = 0.0;
    std::vector<std::vector<double>> active_points;
    /// Relaxed objective at each exchange iteration.
    std::vector<double> objective_history;
    /// Most-violated residual found for the multipliers before the nu shift.
    double residual = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    /// The most-violated point was already active: the remaining residual is LP
    /// round-off that more constraints cannot remove. Counts as converged.
    bool stalled = false;
};

struct DualResult {
    /// raw_objective clamped to [0, 1].
    double value = 0.0;
    DualCertificate certificate;
};

struct ViolatedPoint {
    std::vector<double> w;
    double residual = 0.0;
};

/// Global minimizer of the constraint function over the support. Exact for
/// piecewise-linear payoffs; dense scan plus local refinement otherwise (dim <= 2).
ViolatedPoint most_violated_point(const Multipliers& mult, const Payoff& payoff,
                                  const MomentAmbiguitySet& amb, const SipOptions& opts = {});

struct SubproblemResult {
    Multipliers multipliers;
    double objective = 0.0;
    bool bounded = true;
};

/// The finite relaxation with one constraint per active point. `payoffs[k]` is
/// the payoff at `points[k]`. Unbounded relaxations are reported, not thrown.
SubproblemResult solve_subproblem(const std::vector<std::vector<double>>& points,
                                  std::span<const double> payoffs,
                                  const MomentAmbiguitySet& amb);

/// Worst-case expectation of `payoff` over `amb`, with a dual certificate.
/// Throws SolverError if the relaxation cannot be bounded.
DualResult dual_inner_value(const Payoff& payoff, const MomentAmbiguitySet& amb,
                            const SipOptions& opts = {});

/// Minimum of the constraint function over a tensor grid with `points_per_dim`
/// points per dimension (the certificate is feasible on the grid iff >= 0).
double verify_certificate(const Multipliers& mult, const Payoff& payoff,
                          const MomentAmbiguitySet& amb, std::size_t points_per_dim);

} // namespace drsafe::sip
