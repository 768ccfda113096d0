#pragma once

#include "drsafe/model.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace drsafe {

/// Weighted point set in R^dim. Points are stored row-major: point k occupies
/// points[k*dim .. k*dim + dim).
struct AtomSet {
    std::size_t dim = 1;
    std::vector<double> points;
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
    std::span<const double> point(std::size_t k) const {
        return {points.data() + k * dim, dim};
    }
};

/// Raw fields of a moment ambiguity set: all distributions on `support` with
///   |E[w_i] - mean_i| <= mean_tol_i   and   E[(w - mean)(w - mean)'] <= scale * second_moment.
struct MomentSpec {
    Box support;
    Vector mean;
    Vector mean_tol;
    Matrix second_moment;
    double scale = 1.0;

    std::size_t dim() const { return support.dim(); }
    /// Throws ConfigurationError if the fields are malformed (not if infeasible).
    void validate() const;
};

struct FeasibilityReport {
    bool feasible = false;
    std::size_t atoms_per_dim = 0;
    /// A distribution on the atom grid meeting every constraint (empty when infeasible).
    AtomSet witness;
};

inline constexpr std::size_t kFeasibilityAtoms = 64;

/// Solves the atomized primal with a zero payoff on a grid of `atoms_per_dim`
/// cells per dimension. Throws SolverError if the LP fails for reasons other
/// than infeasibility.
FeasibilityReport check_feasible(const MomentSpec& spec,
                                 std::size_t atoms_per_dim = kFeasibilityAtoms);

/// Moment ambiguity set. Construction validates the fields, clamps tiny negative
/// eigenvalues of the second-moment matrix and rejects infeasible sets.
class MomentAmbiguitySet {
public:
    explicit MomentAmbiguitySet(MomentSpec spec);

    const MomentSpec& spec() const { return spec_; }
    std::size_t dim() const { return spec_.dim(); }
    const Box& support() const { return spec_.support; }
    const Vector& mean() const { return spec_.mean; }
    const Vector& mean_tol() const { return spec_.mean_tol; }
    const Matrix& second_moment() const { return spec_.second_moment; }
    double scale() const { return spec_.scale; }

    /// b - m, the coefficient of the lower mean multiplier.
    Vector lower_offset() const { return spec_.mean_tol - spec_.mean; }
    /// b + m, the coefficient of the upper mean multiplier.
    Vector upper_offset() const { return spec_.mean_tol + spec_.mean; }

    const AtomSet& witness() const { return witness_; }

private:
    MomentSpec spec_;
    AtomSet witness_;
};

/// Scalar moment set on [lo, hi].
MomentAmbiguitySet scalar_ambiguity(double lo, double hi, double mean, double mean_tol,
                                    double second_moment, double scale);

/// A single, fully specified disturbance distribution.
class NominalDistribution {
public:
    enum class Kind { Uniform, TruncatedNormal, Atoms };

    static NominalDistribution uniform(Box support);
    /// Independent per-dimension normals N(mean_i, stddev_i^2) truncated to `support`.
    static NominalDistribution truncated_normal(Vector mean, Vector stddev, Box support);
    static NominalDistribution atoms(AtomSet atoms);

    Kind kind() const { return kind_; }
    const Box& support() const { return support_; }
    std::size_t dim() const { return support_.dim(); }
    const Vector& mean() const { return mean_; }
    const Vector& stddev() const { return stddev_; }
    const AtomSet& atom_list() const { return atoms_; }

private:
    NominalDistribution() = default;

    Kind kind_ = Kind::Uniform;
    Box support_;
    Vector mean_;
    Vector stddev_;
    AtomSet atoms_;
};

/// Deterministic midpoint-rule atomization on the support box. Each cell's weight
/// is the distribution's mass in that cell, renormalized to sum to one. Atom
/// lists pass through unchanged.
AtomSet singleton(const NominalDistribution& nominal, std::size_t atoms_per_dim);

/// Standard normal CDF.
double normal_cdf(double z);

/// Disturbance statistics of the TCL benchmark: mean 0 and variance 0.25^2.
struct TclDisturbance {
    double mean = 0.0;
    double variance = 0.0625;

    /// Half-width of the support of a uniform law with this variance, sqrt(3 variance).
    double uniform_halfwidth() const;
    /// Half-width 0.5 * sqrt(variance / 12) as printed in the benchmark description.
    double literal_halfwidth() const;
};

} // namespace drsafe
