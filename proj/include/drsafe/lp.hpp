#pragma once

#include <cstddef>
#include <string>
#include <vector>

/// Small dense linear programming routines.
///
/// The problems solved in this library are tiny (a handful of rows, or a
/// handful of columns), so a dense two-phase tableau simplex is sufficient.
namespace drsafe::lp {

enum class Relation { LessEqual, Equal, GreaterEqual };

struct Row {
    std::vector<double> coeffs;
    Relation relation = Relation::LessEqual;
    double rhs = 0.0;
};

/**
 * Linear program in the form
 *
 *   minimize    c'x
 *   subject to  a_i'x (<=, =, >=) b_i   for every row i
 *               x >= 0
 *
 * Free variables must be split by the caller.
 */
struct Problem {
    std::size_t num_vars = 0;
    std::vector<double> objective;
    std::vector<Row> rows;

    void add_row(std::vector<double> coeffs, Relation relation, double rhs);
};

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };

std::string to_string(Status status);

struct Options {
    double tolerance = 1e-9;
    std::size_t max_iterations = 50000;
};

struct Solution {
    Status status = Status::Infeasible;
    double objective = 0.0;
    std::vector<double> x;
    std::size_t iterations = 0;
};

Solution solve(const Problem& problem, const Options& options = {});

} // namespace drsafe::lp
