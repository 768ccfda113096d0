#include "drsafe/oracle.hpp"

#include "drsafe/errors.hpp"
#include "drsafe/lp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace drsafe::oracle {

std::vector<double> dyadic_grid(double lo, double hi, std::size_t cells) {
    if (cells == 0) throw ConfigurationError("atom grid needs at least one cell");
    std::vector<double> out(cells + 1);
    const double width = hi - lo;
    for (std::size_t k = 0; k <= cells; ++k) {
        out[k] = lo + width * (static_cast<double>(k) / static_cast<double>(cells));
    }
    out.back() = hi;
    return out;
}

AtomSet product_grid(const Box& box, std::size_t cells_per_dim) {
    const std::size_t l = box.dim();
    std::vector<std::vector<double>> axes;
    std::size_t total = 1;
    for (std::size_t i = 0; i < l; ++i) {
        if (box.lo(i) == box.hi(i)) axes.push_back({box.lo(i)});
        else axes.push_back(dyadic_grid(box.lo(i), box.hi(i), cells_per_dim));
        total *= axes.back().size();
    }
    AtomSet out;
    out.dim = l;
    out.points.reserve(total * l);
    std::vector<std::size_t> idx(l, 0);
    for (std::size_t k = 0; k < total; ++k) {
        for (std::size_t i = 0; i < l; ++i) out.points.push_back(axes[i][idx[i]]);
        for (std::size_t i = l; i-- > 0;) {
            if (++idx[i] < axes[i].size()) break;
            idx[i] = 0;
        }
    }
    out.weights.assign(total, 0.0);
    return out;
}

namespace {

constexpr std::size_t kMaxCutRounds = 50;
constexpr double kConeTolerance = 1e-9;

} // namespace

PrimalResult primal_on_atoms(const MomentSpec& spec, const AtomSet& atoms,
                             std::span<const double> payoffs) {
    const std::size_t l = spec.dim();
    const std::size_t n = atoms.size();
    if (atoms.dim != l) throw ConfigurationError("atom dimension does not match ambiguity set");
    if (payoffs.size() != n) throw ConfigurationError("one payoff per atom required");
    if (n == 0) throw ConfigurationError("atom set is empty");

    lp::Problem prob;
    prob.num_vars = n;
    prob.objective.assign(payoffs.begin(), payoffs.end());
    prob.add_row(std::vector<double>(n, 1.0), lp::Relation::Equal, 1.0);
    for (std::size_t i = 0; i < l; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        std::vector<double> first(n);
        std::vector<double> second(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double w = atoms.point(k)[i];
            first[k] = w;
            second[k] = (w - spec.mean[ii]) * (w - spec.mean[ii]);
        }
        prob.add_row(first, lp::Relation::LessEqual, spec.mean[ii] + spec.mean_tol[ii]);
        prob.add_row(std::move(first), lp::Relation::GreaterEqual,
                     spec.mean[ii] - spec.mean_tol[ii]);
        prob.add_row(std::move(second), lp::Relation::LessEqual,
                     spec.scale * spec.second_moment(ii, ii));
    }

    PrimalResult result;
    result.atoms = atoms;
    while (true) {
        const lp::Solution sol = lp::solve(prob);
        if (sol.status == lp::Status::Infeasible) {
            throw RefineGridError("atomized moment problem is infeasible on " +
                                      std::to_string(n) + " atoms; refine the grid",
                                  n);
        }
        if (sol.status != lp::Status::Optimal) {
            throw SolverError("atomized primal LP failed: " + lp::to_string(sol.status));
        }
        result.atoms.weights = sol.x;
        result.value = sol.objective;
        if (l == 1) break;

        // Second-moment cone for l > 1: add a cut along the most negative
        // eigenvector of c*Sigma - M until the residual matrix is PSD.
        Matrix moment = Matrix::Zero(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(l));
        for (std::size_t k = 0; k < n; ++k) {
            if (sol.x[k] == 0.0) continue;
            Vector d(static_cast<Eigen::Index>(l));
            for (std::size_t i = 0; i < l; ++i) {
                d[static_cast<Eigen::Index>(i)] =
                    atoms.point(k)[i] - spec.mean[static_cast<Eigen::Index>(i)];
            }
            moment += sol.x[k] * d * d.transpose();
        }
        const Matrix slack = spec.scale * spec.second_moment - moment;
        Eigen::SelfAdjointEigenSolver<Matrix> eig(slack);
        if (eig.eigenvalues()[0] >= -kConeTolerance) break;
        if (result.cut_rounds == kMaxCutRounds) {
            result.cone_exact = false;
            break;
        }
        const Vector dir = eig.eigenvectors().col(0);
        std::vector<double> row(n);
        for (std::size_t k = 0; k < n; ++k) {
            double proj = 0.0;
            for (std::size_t i = 0; i < l; ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                proj += dir[ii] * (atoms.point(k)[i] - spec.mean[ii]);
            }
            row[k] = proj * proj;
        }
        prob.add_row(std::move(row), lp::Relation::LessEqual,
                     spec.scale * dir.dot(spec.second_moment * dir));
        ++result.cut_rounds;
    }
    return result;
}

PrimalResult primal_value(const MomentAmbiguitySet& amb, const PayoffFn& payoff,
                          std::size_t atoms_per_dim) {
    AtomSet grid = product_grid(amb.support(), atoms_per_dim);
    std::vector<double> g(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) g[k] = payoff(grid.point(k));
    return primal_on_atoms(amb.spec(), grid, g);
}

double nominal_expectation(const NominalDistribution& nominal, const PayoffFn& payoff,
                           std::size_t atoms_per_dim) {
    const AtomSet atoms = singleton(nominal, atoms_per_dim);
    double sum = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) sum += atoms.weights[k] * payoff(atoms.point(k));
    return sum;
}

} // namespace drsafe::oracle
