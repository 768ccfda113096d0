#include "drsafe/simulate.hpp"

#include "drsafe/errors.hpp"
#include "drsafe/parallel.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>

namespace drsafe {

ClosedLoopPolicy as_policy(const SafetyOrientedController& controller) {
    return [&controller](const Vector& x, std::size_t t) { return controller.act(x, t); };
}

std::mt19937_64 trajectory_engine(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

double uniform01(std::mt19937_64& engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

Vector sample_disturbance(const NominalDistribution& dist, std::mt19937_64& engine) {
    const std::size_t l = dist.dim();
    const Box& box = dist.support();
    Vector w(static_cast<Eigen::Index>(l));
    switch (dist.kind()) {
    case NominalDistribution::Kind::Uniform:
        for (std::size_t d = 0; d < l; ++d) {
            w[static_cast<Eigen::Index>(d)] = box.lo(d) + (box.hi(d) - box.lo(d)) * uniform01(engine);
        }
        break;
    case NominalDistribution::Kind::TruncatedNormal:
        for (std::size_t d = 0; d < l; ++d) {
            const auto i = static_cast<Eigen::Index>(d);
            const double mu = dist.mean()[i], sd = dist.stddev()[i];
            const double u = uniform01(engine);
            if (sd == 0.0 || box.lo(d) == box.hi(d)) {
                w[i] = std::clamp(mu, box.lo(d), box.hi(d));
                continue;
            }
            const boost::math::normal_distribution<double> normal(mu, sd);
            const double fa = boost::math::cdf(normal, box.lo(d));
            const double fb = boost::math::cdf(normal, box.hi(d));
            const double p = fa + u * (fb - fa);
            double x;
            if (p <= 0.0) {
                x = box.lo(d);
            } else if (p >= 1.0) {
                x = box.hi(d);
            } else {
                x = boost::math::quantile(normal, p);
            }
            w[i] = std::clamp(x, box.lo(d), box.hi(d));
        }
        break;
    case NominalDistribution::Kind::Atoms: {
        const AtomSet& atoms = dist.atom_list();
        const double u = uniform01(engine);
        double acc = 0.0;
        std::size_t k = 0;
        for (; k + 1 < atoms.size(); ++k) {
            acc += atoms.weights[k];
            if (u < acc) break;
        }
        const auto p = atoms.point(k);
        for (std::size_t d = 0; d < l; ++d) w[static_cast<Eigen::Index>(d)] = p[d];
        break;
    }
    }
    return w;
}

bool support_within(const NominalDistribution& dist, const Box& w) {
    if (dist.dim() != w.dim()) return false;
    for (std::size_t d = 0; d < w.dim(); ++d) {
        if (dist.support().lo(d) < w.lo(d) || dist.support().hi(d) > w.hi(d)) return false;
    }
    return true;
}

Trajectory rollout(const Model& model, const ClosedLoopPolicy& policy,
                   const NominalDistribution& true_dist, const Vector& x0, std::uint64_t seed,
                   std::uint64_t index) {
    if (true_dist.dim() != model.dynamics.disturbance_dim()) {
        throw ConfigurationError("true disturbance dimension does not match the model");
    }
    auto engine = trajectory_engine(seed, index);
    Trajectory tr;
    tr.states.reserve(model.horizon + 1);
    tr.states.push_back(x0);
    bool safe = model.safe_region.contains(x0);
    for (std::size_t t = 0; t < model.horizon; ++t) {
        const Vector& x = tr.states.back();
        const Action a = policy(x, t);
        const Vector w = sample_disturbance(true_dist, engine);
        Vector next = model.dynamics.step(x, model.controls[a.control], w);
        safe = safe && model.safe_region.contains(next);
        tr.controls.push_back(a.control);
        tr.branches.push_back(a.branch);
        tr.states.push_back(std::move(next));
    }
    tr.safe = safe;
    return tr;
}

double quantile(const std::vector<double>& sorted, double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

SimulationReport monte_carlo(const Model& model, const ClosedLoopPolicy& policy,
                             const NominalDistribution& true_dist, const Vector& x0,
                             std::size_t samples, std::uint64_t seed,
                             const MonteCarloOptions& options) {
    if (samples == 0) throw ConfigurationError("monte_carlo needs at least one sample");
    std::vector<Trajectory> runs(samples);
    parallel_for(samples, options.threads, [&](std::size_t i) {
        runs[i] = rollout(model, policy, true_dist, x0, seed, i);
    });

    SimulationReport report;
    report.samples = samples;
    report.seed = seed;
    for (const auto& r : runs) report.safe_count += r.safe ? 1 : 0;
    report.probability = static_cast<double>(report.safe_count) / static_cast<double>(samples);

    std::vector<double> column(samples);
    for (std::size_t t = 0; t <= model.horizon; ++t) {
        for (std::size_t i = 0; i < samples; ++i) column[i] = runs[i].states[t][0];
        std::sort(column.begin(), column.end());
        report.stage_quantiles.push_back({column.front(), quantile(column, 0.25),
                                          quantile(column, 0.5), quantile(column, 0.75),
                                          column.back()});
    }
    if (options.keep_trajectories) report.trajectories = std::move(runs);
    return report;
}

} // namespace drsafe
