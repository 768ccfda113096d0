#include <doctest.h>

#include "drsafe/lp.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

using namespace drsafe::lp;

TEST_CASE("textbook maximization") {
    // max 3x + 5y  s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  -> 36 at (2, 6)
    Problem p;
    p.num_vars = 2;
    p.objective = {-3.0, -5.0};
    p.add_row({1, 0}, Relation::LessEqual, 4);
    p.add_row({0, 2}, Relation::LessEqual, 12);
    p.add_row({3, 2}, Relation::LessEqual, 18);
    const Solution s = solve(p);
    REQUIRE(s.status == Status::Optimal);
    CHECK(s.objective == doctest::Approx(-36.0));
    CHECK(s.x[0] == doctest::Approx(2.0));
    CHECK(s.x[1] == doctest::Approx(6.0));
}

TEST_CASE("equality and >= rows need phase one") {
    // min x + y  s.t. x + y = 1, x >= 0.25
    Problem p;
    p.num_vars = 2;
    p.objective = {1.0, 2.0};
    p.add_row({1, 1}, Relation::Equal, 1);
    p.add_row({1, 0}, Relation::GreaterEqual, 0.25);
    const Solution s = solve(p);
    REQUIRE(s.status == Status::Optimal);
    CHECK(s.objective == doctest::Approx(1.0));
    CHECK(s.x[0] == doctest::Approx(1.0));
}

TEST_CASE("redundant equality rows are dropped") {
    Problem p;
    p.num_vars = 2;
    p.objective = {1.0, -1.0};
    p.add_row({1, 1}, Relation::Equal, 1);
    p.add_row({2, 2}, Relation::Equal, 2);
    const Solution s = solve(p);
    REQUIRE(s.status == Status::Optimal);
    CHECK(s.objective == doctest::Approx(-1.0));
}

TEST_CASE("infeasible and unbounded are reported") {
    Problem inf;
    inf.num_vars = 1;
    inf.objective = {1.0};
    inf.add_row({1}, Relation::LessEqual, 1);
    inf.add_row({1}, Relation::GreaterEqual, 2);
    CHECK(solve(inf).status == Status::Infeasible);

    Problem unb;
    unb.num_vars = 2;
    unb.objective = {-1.0, 0.0};
    unb.add_row({1, -1}, Relation::LessEqual, 1);
    CHECK(solve(unb).status == Status::Unbounded);
}

TEST_CASE("negative right-hand sides are normalized") {
    // min x  s.t. -x <= -3  -> x = 3
    Problem p;
    p.num_vars = 1;
    p.objective = {1.0};
    p.add_row({-1}, Relation::LessEqual, -3);
    const Solution s = solve(p);
    REQUIRE(s.status == Status::Optimal);
    CHECK(s.x[0] == doctest::Approx(3.0));
}

namespace {

// Brute force: enumerate every basic point of {Ax <= b, 0 <= x <= 10}.
double enumerate_vertices(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                          const Eigen::VectorXd& c) {
    const int n = static_cast<int>(c.size());
    const int m = static_cast<int>(a.rows());
    Eigen::MatrixXd all(m + 2 * n, n);
    Eigen::VectorXd rhs(m + 2 * n);
    all << a, -Eigen::MatrixXd::Identity(n, n), Eigen::MatrixXd::Identity(n, n);
    rhs << b, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Constant(n, 10.0);
    const int rows = static_cast<int>(all.rows());
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> pick(n);
    std::vector<bool> sel(rows, false);
    std::fill(sel.begin(), sel.begin() + n, true);
    do {
        Eigen::MatrixXd sub(n, n);
        Eigen::VectorXd sr(n);
        int k = 0;
        for (int r = 0; r < rows; ++r) {
            if (!sel[r]) continue;
            sub.row(k) = all.row(r);
            sr[k++] = rhs[r];
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
        if (lu.rank() < n) continue;
        const Eigen::VectorXd x = lu.solve(sr);
        if (((all * x - rhs).array() <= 1e-9).all()) best = std::min(best, c.dot(x));
    } while (std::prev_permutation(sel.begin(), sel.end()));
    return best;
}

} // namespace

TEST_CASE("random small LPs agree with vertex enumeration") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    std::uniform_real_distribution<double> pos(0.5, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + trial % 2;
        const int m = 2 + trial % 3;
        Eigen::MatrixXd a(m, n);
        Eigen::VectorXd b(m);
        Eigen::VectorXd c(n);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) a(i, j) = coef(rng);
            b[i] = pos(rng);
        }
        for (int j = 0; j < n; ++j) c[j] = coef(rng);

        Problem p;
        p.num_vars = static_cast<std::size_t>(n);
        p.objective.assign(c.data(), c.data() + n);
        for (int i = 0; i < m; ++i) {
            std::vector<double> row(static_cast<std::size_t>(n));
            for (int j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = a(i, j);
            p.add_row(row, Relation::LessEqual, b[i]);
        }
        for (int j = 0; j < n; ++j) {
            std::vector<double> row(static_cast<std::size_t>(n), 0.0);
            row[static_cast<std::size_t>(j)] = 1.0;
            p.add_row(row, Relation::LessEqual, 10.0);
        }
        const Solution s = solve(p);
        REQUIRE(s.status == Status::Optimal);
        CHECK(s.objective == doctest::Approx(enumerate_vertices(a, b, c)).epsilon(1e-9));
    }
}

TEST_CASE("nearly parallel rows keep the basis feasible") {
    // Dual exchange relaxation with two almost coincident support points; the
    // reference optimum comes from HiGHS.
    const double w[] = {0.4330127018922193, 0.0, -0.18846671181709573, 0.05380392965797165,
                        -0.18840814447163723, 0.049892039357590429};
    const double g[] = {0.98335657061744253, 0.99462887964447577, 0.99262267088171074,
                        0.99398089152847979, 0.99262254562977903, 0.9940084325288312};
    Problem p;
    p.num_vars = 5;
    p.objective = {0.1, 0.1, 0.0625, 1.0, -1.0};
    for (int k = 0; k < 6; ++k) p.add_row({w[k], -w[k], -w[k] * w[k], -1.0, 1.0}, Relation::LessEqual, g[k]);
    const Solution s = solve(p);
    REQUIRE(s.status == Status::Optimal);
    CHECK(-s.objective == doctest::Approx(0.9906777956262501).epsilon(1e-10));
    for (int k = 0; k < 6; ++k) {
        const double lhs = w[k] * (s.x[0] - s.x[1]) - w[k] * w[k] * s.x[2] - s.x[3] + s.x[4];
        CHECK(lhs <= g[k] + 1e-12);
    }
}
