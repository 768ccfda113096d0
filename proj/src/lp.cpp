#include "drsafe/lp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace drsafe::lp {

void Problem::add_row(std::vector<double> coeffs, Relation relation, double rhs) {
    if (coeffs.size() != num_vars) {
        throw std::invalid_argument("lp row has " + std::to_string(coeffs.size()) +
                                    " coefficients, expected " + std::to_string(num_vars));
    }
    rows.push_back(Row{std::move(coeffs), relation, rhs});
}

std::string to_string(Status status) {
    switch (status) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::IterationLimit: return "iteration limit";
    }
    return "unknown";
}

namespace {

/// Dense simplex tableau. Row `m` holds reduced costs, last column the rhs.
class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols)
        : m_(rows), n_(cols), data_((rows + 1) * (cols + 1), 0.0), basis_(rows, 0), origin_(rows) {
        for (std::size_t i = 0; i < rows; ++i) origin_[i] = i;
    }

    double& at(std::size_t i, std::size_t j) { return data_[i * (n_ + 1) + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * (n_ + 1) + j]; }
    double& rhs(std::size_t i) { return at(i, n_); }
    double rhs(std::size_t i) const { return at(i, n_); }

    std::size_t rows() const { return m_; }
    std::size_t cols() const { return n_; }
    std::vector<std::size_t>& basis() { return basis_; }
    const std::vector<std::size_t>& basis() const { return basis_; }
    /// Index of the original constraint each tableau row came from.
    const std::vector<std::size_t>& origin() const { return origin_; }

    void pivot(std::size_t r, std::size_t c) {
        const std::size_t width = n_ + 1;
        double* prow = &data_[r * width];
        const double inv = 1.0 / prow[c];
        for (std::size_t j = 0; j < width; ++j) prow[j] *= inv;
        prow[c] = 1.0;
        for (std::size_t i = 0; i <= m_; ++i) {
            if (i == r) continue;
            double* row = &data_[i * width];
            const double factor = row[c];
            if (factor == 0.0) continue;
            for (std::size_t j = 0; j < width; ++j) row[j] -= factor * prow[j];
            row[c] = 0.0;
        }
        basis_[r] = c;
    }

    /// Recompute the reduced-cost row for the cost vector `cost`.
    void price(const std::vector<double>& cost) {
        for (std::size_t j = 0; j <= n_; ++j) at(m_, j) = (j < n_) ? cost[j] : 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
            const double cb = cost[basis_[i]];
            if (cb == 0.0) continue;
            for (std::size_t j = 0; j <= n_; ++j) at(m_, j) -= cb * at(i, j);
        }
    }

    /// Objective value of the current basic solution under the priced cost.
    double objective() const { return -at(m_, n_); }

    void drop_row(std::size_t r) {
        const std::size_t width = n_ + 1;
        data_.erase(data_.begin() + static_cast<std::ptrdiff_t>(r * width),
                    data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * width));
        basis_.erase(basis_.begin() + static_cast<std::ptrdiff_t>(r));
        origin_.erase(origin_.begin() + static_cast<std::ptrdiff_t>(r));
        --m_;
    }

private:
    std::size_t m_;
    std::size_t n_;
    std::vector<double> data_;
    std::vector<std::size_t> basis_;
    std::vector<std::size_t> origin_;
};

enum class PhaseResult { Optimal, Unbounded, IterationLimit };

PhaseResult run_phase(Tableau& t, const std::vector<bool>& allowed, const Options& opt,
                      std::size_t& iterations) {
    const double tol = opt.tolerance;
    std::size_t degenerate_streak = 0;
    while (true) {
        if (iterations >= opt.max_iterations) return PhaseResult::IterationLimit;
        // Dantzig pricing, Bland's rule once degenerate pivots start to repeat.
        const bool bland = degenerate_streak > 50;
        std::size_t enter = t.cols();
        double best = -tol;
        for (std::size_t j = 0; j < t.cols(); ++j) {
            if (!allowed[j]) continue;
            const double d = t.at(t.rows(), j);
            if (d < best) {
                enter = j;
                best = d;
                if (bland) break;
            }
        }
        if (enter == t.cols()) return PhaseResult::Optimal;

        std::size_t leave = t.rows();
        double ratio = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < t.rows(); ++i) {
            const double a = t.at(i, enter);
            if (a <= tol) continue;
            const double r = std::max(0.0, t.rhs(i)) / a;
            // Ties are relative so a near-minimal row never overshoots the true
            // minimum by more than round-off; Bland order breaks them.
            const double slack = 1e-12 * std::max(1.0, std::abs(ratio));
            if (leave == t.rows() || r < ratio - slack ||
                (r <= ratio + slack && t.basis()[i] < t.basis()[leave])) {
                ratio = std::min(ratio, r);
                leave = i;
            }
        }
        if (leave == t.rows()) return PhaseResult::Unbounded;
        degenerate_streak = (ratio <= tol) ? degenerate_streak + 1 : 0;
        t.pivot(leave, enter);
        ++iterations;
    }
}

} // namespace

Solution solve(const Problem& problem, const Options& options) {
    const std::size_t n = problem.num_vars;
    if (problem.objective.size() != n) {
        throw std::invalid_argument("lp objective size does not match num_vars");
    }
    const std::size_t m = problem.rows.size();

    std::size_t slack_count = 0;
    std::size_t artificial_count = 0;
    std::vector<double> sign(m, 1.0);
    std::vector<Relation> relation(m);
    for (std::size_t i = 0; i < m; ++i) {
        const Row& row = problem.rows[i];
        relation[i] = row.relation;
        if (row.rhs < 0.0) {
            sign[i] = -1.0;
            if (row.relation == Relation::LessEqual) relation[i] = Relation::GreaterEqual;
            else if (row.relation == Relation::GreaterEqual) relation[i] = Relation::LessEqual;
        }
        if (relation[i] != Relation::Equal) ++slack_count;
        if (relation[i] != Relation::LessEqual) ++artificial_count;
    }

    const std::size_t first_slack = n;
    const std::size_t first_artificial = n + slack_count;
    const std::size_t cols = n + slack_count + artificial_count;
    Tableau t(m, cols);

    std::size_t next_slack = first_slack;
    std::size_t next_artificial = first_artificial;
    for (std::size_t i = 0; i < m; ++i) {
        const Row& row = problem.rows[i];
        for (std::size_t j = 0; j < n; ++j) t.at(i, j) = sign[i] * row.coeffs[j];
        t.rhs(i) = sign[i] * row.rhs;
        switch (relation[i]) {
        case Relation::LessEqual:
            t.at(i, next_slack) = 1.0;
            t.basis()[i] = next_slack++;
            break;
        case Relation::GreaterEqual:
            t.at(i, next_slack++) = -1.0;
            t.at(i, next_artificial) = 1.0;
            t.basis()[i] = next_artificial++;
            break;
        case Relation::Equal:
            t.at(i, next_artificial) = 1.0;
            t.basis()[i] = next_artificial++;
            break;
        }
    }

    Eigen::MatrixXd original(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(cols + 1));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j <= cols; ++j) {
            original(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.at(i, j);
        }
    }

    Solution sol;
    std::vector<bool> allowed(cols, true);

    if (artificial_count > 0) {
        std::vector<double> phase1(cols, 0.0);
        for (std::size_t j = first_artificial; j < cols; ++j) phase1[j] = 1.0;
        t.price(phase1);
        const PhaseResult r = run_phase(t, allowed, options, sol.iterations);
        if (r == PhaseResult::IterationLimit) {
            sol.status = Status::IterationLimit;
            return sol;
        }
        double scale = 1.0;
        for (const Row& row : problem.rows) scale = std::max(scale, std::abs(row.rhs));
        if (t.objective() > options.tolerance * scale * 10.0) {
            sol.status = Status::Infeasible;
            return sol;
        }
        // Drive remaining zero-level artificials out of the basis.
        for (std::size_t i = 0; i < t.rows();) {
            if (t.basis()[i] < first_artificial) {
                ++i;
                continue;
            }
            std::size_t col = first_artificial;
            double best = options.tolerance;
            for (std::size_t j = 0; j < first_artificial; ++j) {
                if (std::abs(t.at(i, j)) > best) {
                    best = std::abs(t.at(i, j));
                    col = j;
                }
            }
            if (col == first_artificial) {
                t.drop_row(i);
            } else {
                t.pivot(i, col);
                ++i;
            }
        }
        for (std::size_t j = first_artificial; j < cols; ++j) allowed[j] = false;
    }

    std::vector<double> cost(cols, 0.0);
    std::copy(problem.objective.begin(), problem.objective.end(), cost.begin());
    t.price(cost);
    const PhaseResult r = run_phase(t, allowed, options, sol.iterations);
    if (r == PhaseResult::Unbounded) {
        sol.status = Status::Unbounded;
        return sol;
    }
    if (r == PhaseResult::IterationLimit) {
        sol.status = Status::IterationLimit;
        return sol;
    }

    sol.status = Status::Optimal;
    // Pivoting accumulates round-off in the tableau; recompute the basic
    // solution from the original rows of the final basis.
    const auto k = static_cast<Eigen::Index>(t.rows());
    Eigen::VectorXd xb(k);
    for (Eigen::Index i = 0; i < k; ++i) xb[i] = t.rhs(static_cast<std::size_t>(i));
    if (k > 0) {
        Eigen::MatrixXd basis(k, k);
        Eigen::VectorXd rhs(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            const auto row = static_cast<Eigen::Index>(t.origin()[static_cast<std::size_t>(i)]);
            rhs[i] = original(row, static_cast<Eigen::Index>(cols));
            for (Eigen::Index j = 0; j < k; ++j) {
                basis(i, j) = original(row, static_cast<Eigen::Index>(t.basis()[static_cast<std::size_t>(j)]));
            }
        }
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(basis);
        if (lu.isInvertible()) {
            const Eigen::VectorXd refined = lu.solve(rhs);
            if ((refined - xb).cwiseAbs().maxCoeff() <= 1e-6 * (1.0 + xb.cwiseAbs().maxCoeff())) xb = refined;
        }
    }
    sol.x.assign(n, 0.0);
    for (std::size_t i = 0; i < t.rows(); ++i) {
        if (t.basis()[i] < n) sol.x[t.basis()[i]] = std::max(0.0, xb[static_cast<Eigen::Index>(i)]);
    }
    sol.objective = 0.0;
    for (std::size_t j = 0; j < n; ++j) sol.objective += problem.objective[j] * sol.x[j];
    return sol;
}

} // namespace drsafe::lp
