#pragma once

#include "drsafe/ambiguity.hpp"
#include "drsafe/model.hpp"
#include "drsafe/policy.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace drsafe {

/// Closed-loop control law (x, t) -> action.
using ClosedLoopPolicy = std::function<Action(const Vector& x, std::size_t t)>;

ClosedLoopPolicy as_policy(const SafetyOrientedController& controller);

/// Per-trajectory generator: mt19937_64 seeded from seed_seq over the 32-bit
/// halves of (seed, index), so every sample is reproducible on its own.
std::mt19937_64 trajectory_engine(std::uint64_t seed, std::uint64_t index);

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
double uniform01(std::mt19937_64& engine);

/// One disturbance draw. Truncated normals use the inverse CDF on the truncated
/// interval; atom lists are sampled by their cumulative weights.
Vector sample_disturbance(const NominalDistribution& dist, std::mt19937_64& engine);

/// True iff the distribution's support lies inside W.
bool support_within(const NominalDistribution& dist, const Box& w);

struct Trajectory {
    std::vector<Vector> states;          // x_0 .. x_T
    std::vector<std::size_t> controls;   // u_0 .. u_{T-1}
    std::vector<Branch> branches;
    bool safe = false;
};

Trajectory rollout(const Model& model, const ClosedLoopPolicy& policy,
                   const NominalDistribution& true_dist, const Vector& x0, std::uint64_t seed,
                   std::uint64_t index = 0);

/// min, Q1, median, Q3, max.
using FiveNumber = std::array<double, 5>;

/// Sample quantile with linear interpolation between order statistics
/// (h = (n - 1) p). `sorted` must be ascending and nonempty.
double quantile(const std::vector<double>& sorted, double p);

struct SimulationReport {
    std::size_t samples = 0;
    std::size_t safe_count = 0;
    double probability = 0.0;
    std::uint64_t seed = 0;
    /// Per-stage five-number summary of the first state coordinate.
    std::vector<FiveNumber> stage_quantiles;
    /// Only filled when requested.
    std::vector<Trajectory> trajectories;
};

struct MonteCarloOptions {
    std::size_t threads = 1;
    bool keep_trajectories = false;
};

SimulationReport monte_carlo(const Model& model, const ClosedLoopPolicy& policy,
                             const NominalDistribution& true_dist, const Vector& x0,
                             std::size_t samples, std::uint64_t seed,
                             const MonteCarloOptions& options = {});

} // namespace drsafe
