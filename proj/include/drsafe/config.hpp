#pragma once

#include "drsafe/ambiguity.hpp"
#include "drsafe/bellman.hpp"
#include "drsafe/model.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace drsafe::config {

/// One `key = value` line of a config file.
struct Entry {
    std::string value;
    std::size_t line = 0;
};

/// Sectioned key/value text as parsed, before validation.
struct RawConfig {
    std::string source;
    std::map<std::string, std::map<std::string, Entry>> sections;
};

/// Throws ConfigurationError with the offending line on syntax errors.
RawConfig parse(const std::string& text, const std::string& source = "<config>");
RawConfig parse_file(const std::string& path);

enum class Mode { Robust, Nominal, Compare };
std::string to_string(Mode mode);
Mode parse_mode(const std::string& text);

struct ModelConfig {
    std::string preset = "tcl";
    TclParameters tcl;
    std::optional<AffineDescriptor> affine;
    std::vector<Vector> controls;
    Vector safe_lo;
    Vector safe_hi;
    std::size_t horizon = 18;
};

struct GridConfig {
    Vector lo;
    Vector hi;
    std::vector<std::size_t> nodes;
};

struct AmbiguityConfig {
    Vector support_lo;
    Vector support_hi;
    Vector mean;
    Vector mean_tol;
    Matrix second_moment;
    double scale = 1.0;
};

struct DistributionConfig {
    std::string kind = "uniform";  // uniform | truncated_normal
    Vector mean;
    Vector stddev;
};

struct PolicyConfig {
    double alpha = 0.95;
    std::size_t fallback = 0;
};

struct SweepConfig {
    std::vector<double> b = {0.0, 0.05, 0.1};
    std::vector<double> c = {1.0, 2.0, 4.0};
};

struct SimulateConfig {
    DistributionConfig truth;
    Vector x0;
    std::size_t samples = 10000;
    std::uint64_t seed = 2024;
};

struct AuditConfig {
    std::size_t samples = 50;
    std::uint64_t seed = 7;
};

struct RunConfig {
    ModelConfig model;
    GridConfig grid;
    AmbiguityConfig ambiguity;
    /// Per-stage ambiguity; empty means `ambiguity` is shared by all stages.
    std::vector<AmbiguityConfig> stage_ambiguity;
    DistributionConfig nominal;
    Mode mode = Mode::Robust;
    PolicyConfig policy;
    SweepConfig sweep;
    SimulateConfig simulate;
    AuditConfig audit;
    std::size_t threads = 1;
};

/// Validates every field and fills defaults (the TCL benchmark for preset tcl).
RunConfig validate(const RawConfig& raw);
RunConfig load(const std::string& path);

/// Deterministic text form of every effective setting, one `key=value` per line.
std::string canonical(const RunConfig& cfg);
/// Canonical text of just the settings that determine value functions.
std::string canonical_solve(const RunConfig& cfg, Mode mode);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& text);
std::string hex(std::uint64_t value);

Model build_model(const RunConfig& cfg);
std::shared_ptr<const StateGrid> build_grid(const RunConfig& cfg, const Model& model);
MomentAmbiguitySet build_ambiguity(const AmbiguityConfig& amb);
NominalDistribution build_distribution(const DistributionConfig& dist, const AmbiguityConfig& amb);
/// One robust entry per stage (or a single shared one), or the nominal model.
std::vector<StageUncertainty> build_schedule(const RunConfig& cfg, Mode mode);
/// W_t for each stage (or one shared box).
std::vector<Box> build_supports(const RunConfig& cfg);

} // namespace drsafe::config
