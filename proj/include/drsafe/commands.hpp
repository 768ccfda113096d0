#pragma once

#include "drsafe/config.hpp"
#include "drsafe/dual_sip.hpp"
#include "drsafe/policy.hpp"
#include "drsafe/simulate.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

/// Subcommands of the drsafe tool. Compare mode writes each mode's artifacts
/// into its own `robust/` and `nominal/` subdirectory.
namespace drsafe::cli {

struct Options {
    std::optional<std::string> config;
    std::filesystem::path out = "out";
    std::optional<std::size_t> threads;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha;
    std::optional<config::Mode> mode;
    bool trajectories = false;
};

/// Loads the config (TCL defaults without one) and applies flag overrides.
config::RunConfig resolve(const Options& options);

struct Solution {
    std::shared_ptr<const Model> model;
    std::shared_ptr<const StateGrid> grid;
    RecursionResult result;
    bool cache_hit = false;
};

/// Value functions for one mode (robust or nominal), from the cache when the
/// canonical settings match.
Solution solve(const config::RunConfig& cfg, config::Mode mode, const std::filesystem::path& out, std::ostream& log);

void write_solution(const Solution& s, const std::filesystem::path& dir);

struct SweepPoint {
    double b = 0;
    double c = 0;
    bool ok = false;
    std::string error;
    std::vector<double> v0;
};

std::vector<SweepPoint> sweep(const config::RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);

struct AuditRow {
    std::size_t stage = 0;
    Vector x;
    std::size_t control = 0;
    double dual = 0;
    /// Oracle primal values at each entry of `cells`.
    std::vector<double> primal;
    std::vector<std::size_t> cells;
    double gap = 0;
    std::size_t weak_violations = 0;
    bool converged = false;
    bool stalled = false;
    std::size_t iterations = 0;
    bool history_monotone = true;
    double certificate_residual = 0;
};

/// Dual value against the primal oracle (kinks of piecewise-linear payoffs are
/// added to every atom grid) plus certificate checks.
AuditRow audit_instance(const sip::Payoff& payoff, const MomentAmbiguitySet& amb);

std::vector<AuditRow> audit(const config::RunConfig& cfg, const Solution& robust);

SafetyOrientedController controller(const config::RunConfig& cfg, const Solution& s);

struct SimulationRun {
    std::string name;
    SimulationReport report;
};

/// Closed-loop runs for the configured mode (both controllers in compare mode).
std::vector<SimulationRun> simulate(const config::RunConfig& cfg, const std::filesystem::path& out, std::ostream& log,
                                    bool keep_trajectories);

int cmd_solve(const Options& options, std::ostream& log);
int cmd_sweep(const Options& options, std::ostream& log);
int cmd_audit(const Options& options, std::ostream& log);
int cmd_simulate(const Options& options, std::ostream& log);
int cmd_safeset(const Options& options, std::ostream& log);

/// Parses argv and dispatches. Exit codes: 0 success, 1 solver or I/O failure,
/// 2 usage or configuration error.
int run(int argc, const char* const* argv, std::ostream& log);

} // namespace drsafe::cli
