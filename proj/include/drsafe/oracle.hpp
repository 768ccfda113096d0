#pragma once

#include "drsafe/ambiguity.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

/// Brute-force solution of the inner worst-case expectation over distributions
/// restricted to a finite atom grid. Used as ground truth for the dual solver
/// and as the expectation engine for fixed distributions.
namespace drsafe::oracle {

using PayoffFn = std::function<double(std::span<const double>)>;

struct PrimalResult {
    double value = 0.0;
    /// Grid atoms with the optimal probability weights.
    AtomSet atoms;
    /// For dim > 1 the second-moment cone is enforced by eigenvector cuts; false
    /// when the cut loop hit its round limit before reaching PSD tolerance.
    bool cone_exact = true;
    std::size_t cut_rounds = 0;
};

/// cells+1 equally spaced points on [lo, hi], endpoints included. Grids with
/// cells = 2^k are nested.
std::vector<double> dyadic_grid(double lo, double hi, std::size_t cells);

/// Tensor product of dyadic grids on a box (weights left empty).
AtomSet product_grid(const Box& box, std::size_t cells_per_dim);

/**
 * Minimize sum_k p_k payoff_k over probability vectors p on the given atoms that
 * satisfy the mean-interval and second-moment constraints of `spec`.
 *
 * Throws RefineGridError if no such p exists on these atoms and SolverError if
 * the LP fails otherwise.
 */
PrimalResult primal_on_atoms(const MomentSpec& spec, const AtomSet& atoms,
                             std::span<const double> payoffs);

/**
 * Worst-case expectation of `payoff` over distributions on a grid with
 * `atoms_per_dim` cells per dimension of the support. An upper bound on the
 * infimum over the full ambiguity set that decreases as the grid is refined.
 */
PrimalResult primal_value(const MomentAmbiguitySet& amb, const PayoffFn& payoff,
                          std::size_t atoms_per_dim);

/// Expectation of `payoff` under the midpoint-rule atomization of `nominal`.
double nominal_expectation(const NominalDistribution& nominal, const PayoffFn& payoff,
                           std::size_t atoms_per_dim);

} // namespace drsafe::oracle
