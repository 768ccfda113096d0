#pragma once

#include <stdexcept>
#include <string>

namespace drsafe {

/// Invalid user input: dimensions, ranges, grid alignment, config syntax.
class ConfigurationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical subroutine failed in a way that is not the caller's fault.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The atomized primal has no feasible point at the requested grid size.
class RefineGridError : public std::runtime_error {
public:
    RefineGridError(const std::string& what, std::size_t atoms_per_dim)
        : std::runtime_error(what), atoms_per_dim_(atoms_per_dim) {}
    std::size_t atoms_per_dim() const noexcept { return atoms_per_dim_; }

private:
    std::size_t atoms_per_dim_;
};

} // namespace drsafe
