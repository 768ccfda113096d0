#include "drsafe/bellman.hpp"

#include "drsafe/errors.hpp"
#include "drsafe/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace drsafe {

StateGrid::StateGrid(Vector lo, Vector hi, std::vector<std::size_t> nodes,
                     const Box& safe_region) {
    const auto n = static_cast<std::size_t>(lo.size());
    if (n == 0 || static_cast<std::size_t>(hi.size()) != n || nodes.size() != n) {
        throw ConfigurationError("grid bounds and node counts must have equal dimension");
    }
    if (safe_region.dim() != n) {
        throw ConfigurationError("grid dimension does not match safe region");
    }
    bounds_ = Box(lo, hi);
    size_ = 1;
    for (std::size_t d = 0; d < n; ++d) {
        const auto dd = static_cast<Eigen::Index>(d);
        if (nodes[d] < 2) throw ConfigurationError("grid needs at least 2 nodes per dimension");
        if (!(lo[dd] < hi[dd])) throw ConfigurationError("grid bounds must satisfy lo < hi");
        if (safe_region.lo(d) < lo[dd] || safe_region.hi(d) > hi[dd]) {
            throw ConfigurationError("safe region is not inside the grid box in dimension " +
                                     std::to_string(d));
        }
        const double h = (hi[dd] - lo[dd]) / static_cast<double>(nodes[d] - 1);
        std::vector<double> axis(nodes[d]);
        for (std::size_t i = 0; i < nodes[d]; ++i) {
            axis[i] = lo[dd] + (hi[dd] - lo[dd]) * (static_cast<double>(i) /
                                                    static_cast<double>(nodes[d] - 1));
        }
        axis.back() = hi[dd];
        for (double face : {safe_region.lo(d), safe_region.hi(d)}) {
            const double pos = (face - lo[dd]) / h;
            const double idx = std::round(pos);
            if (std::abs(pos - idx) > 1e-9) {
                std::ostringstream msg;
                msg << "grid is not aligned with the safe region: face " << face
                    << " of dimension " << d << " falls between nodes";
                throw ConfigurationError(msg.str());
            }
            axis[static_cast<std::size_t>(idx)] = face;
        }
        axes_.push_back(std::move(axis));
        spacing_.push_back(h);
        size_ *= nodes[d];
    }
}

std::size_t StateGrid::flatten(std::span<const std::size_t> index) const {
    std::size_t flat = 0;
    for (std::size_t d = 0; d < axes_.size(); ++d) flat = flat * axes_[d].size() + index[d];
    return flat;
}

std::vector<std::size_t> StateGrid::unflatten(std::size_t flat) const {
    std::vector<std::size_t> idx(axes_.size());
    for (std::size_t d = axes_.size(); d-- > 0;) {
        idx[d] = flat % axes_[d].size();
        flat /= axes_[d].size();
    }
    return idx;
}

Vector StateGrid::node(std::size_t flat) const {
    const std::vector<std::size_t> idx = unflatten(flat);
    Vector x(static_cast<Eigen::Index>(axes_.size()));
    for (std::size_t d = 0; d < axes_.size(); ++d) {
        x[static_cast<Eigen::Index>(d)] = axes_[d][idx[d]];
    }
    return x;
}

void StateGrid::check_envelope(const Model& model, std::span<const Box> supports) const {
    const auto& affine = model.dynamics.affine_descriptor();
    if (!affine) return;
    const auto corners = model.safe_region.corners();
    for (const Box& w : supports) {
        for (const Vector& x : corners) {
            for (const Vector& u : model.controls.controls()) {
                for (const Vector& wc : w.corners()) {
                    const Vector y = affine->apply(x, u, wc);
                    if (!bounds_.contains(y)) {
                        std::ostringstream msg;
                        msg << "grid box does not contain the one-step reachable envelope of "
                               "the safe region (successor "
                            << y.transpose() << " of corner " << x.transpose() << ")";
                        throw ConfigurationError(msg.str());
                    }
                }
            }
        }
    }
}

ValueFunction::ValueFunction(std::size_t stage, std::shared_ptr<const StateGrid> grid,
                             Box safe_region, std::vector<double> values)
    : stage_(stage), grid_(std::move(grid)), safe_region_(std::move(safe_region)),
      values_(std::move(values)) {
    if (!grid_ || values_.size() != grid_->size()) {
        throw ConfigurationError("value function needs one value per grid node");
    }
}

double ValueFunction::at(const double* x) const {
    if (!safe_region_.contains(x)) return 0.0;
    return inside(x);
}

double ValueFunction::inside(const double* x) const {
    const StateGrid& g = *grid_;
    const std::size_t n = g.dim();
    if (n == 1) {
        const auto& axis = g.axis(0);
        const double y = std::clamp(x[0], safe_region_.lo(0), safe_region_.hi(0));
        const double pos = (y - axis.front()) / g.spacing(0);
        std::size_t i = static_cast<std::size_t>(
            std::clamp(std::floor(pos), 0.0, static_cast<double>(axis.size() - 2)));
        const double t = std::clamp((y - axis[i]) / (axis[i + 1] - axis[i]), 0.0, 1.0);
        return (1.0 - t) * values_[i] + t * values_[i + 1];
    }

    std::vector<std::size_t> base(n);
    std::vector<double> frac(n);
    for (std::size_t d = 0; d < n; ++d) {
        const auto& axis = g.axis(d);
        const double y = std::clamp(x[d], safe_region_.lo(d), safe_region_.hi(d));
        const double pos = (y - axis.front()) / g.spacing(d);
        base[d] = static_cast<std::size_t>(
            std::clamp(std::floor(pos), 0.0, static_cast<double>(axis.size() - 2)));
        frac[d] = std::clamp((y - axis[base[d]]) / (axis[base[d] + 1] - axis[base[d]]), 0.0, 1.0);
    }
    double sum = 0.0;
    std::vector<std::size_t> idx(n);
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        double weight = 1.0;
        for (std::size_t d = 0; d < n; ++d) {
            const bool up = (mask >> d) & 1U;
            idx[d] = base[d] + (up ? 1 : 0);
            weight *= up ? frac[d] : 1.0 - frac[d];
        }
        if (weight != 0.0) sum += weight * values_[g.flatten(idx)];
    }
    return sum;
}

ValueFunction terminal(std::shared_ptr<const StateGrid> grid, const Box& safe_region,
                       std::size_t horizon) {
    std::vector<double> values(grid->size());
    for (std::size_t k = 0; k < grid->size(); ++k) {
        values[k] = safe_region.contains(grid->node(k)) ? 1.0 : 0.0;
    }
    return ValueFunction(horizon, std::move(grid), safe_region, std::move(values));
}

const Box& support_of(const StageUncertainty& u) {
    return std::visit([](const auto& s) -> const Box& { return s.support(); }, u);
}

namespace {

struct ScalarAffine {
    double offset;  // A x + B u + c
    double gain;    // G
};

std::optional<ScalarAffine> scalar_affine(const Model& model, const Vector& x, const Vector& u) {
    const auto& aff = model.dynamics.affine_descriptor();
    if (!aff || model.dynamics.state_dim() != 1 || model.dynamics.disturbance_dim() != 1) {
        return std::nullopt;
    }
    const double offset =
        (aff->state_matrix * x + aff->control_matrix * u + aff->offset)[0];
    return ScalarAffine{offset, aff->disturbance_matrix(0, 0)};
}

} // namespace

sip::Payoff next_stage_payoff(const ValueFunction& v_next, const Model& model, const Vector& x,
                              const Vector& u, const Box& support) {
    const auto lin = scalar_affine(model, x, u);
    if (!lin || v_next.grid().dim() != 1) {
        const Model* m = &model;
        const ValueFunction* v = &v_next;
        return sip::Payoff::general(
            model.dynamics.disturbance_dim(), [m, v, x, u](std::span<const double> w) {
                const Vector wv = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
                return (*v)(m->dynamics.step(x, u, wv));
            });
    }

    const double wl = support.lo(0);
    const double wh = support.hi(0);
    const double a = lin->offset;
    const double g = lin->gain;
    const Box& safe = v_next.safe_region();
    if (g == 0.0 || wl == wh) {
        const double y = a + g * wl;
        return sip::Payoff::piecewise_linear({sip::Segment{wl, wh, 0.0, v_next.at(&y)}});
    }

    // kinks of w -> v_next(a + g w): grid nodes of the safe region
    std::vector<double> cuts = {wl, wh};
    for (double node : v_next.grid().axis(0)) {
        if (node < safe.lo(0) || node > safe.hi(0)) continue;
        const double w = (node - a) / g;
        if (w > wl && w < wh) cuts.push_back(w);
    }
    std::sort(cuts.begin(), cuts.end());

    std::vector<sip::Segment> segments;
    segments.reserve(cuts.size());
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double w0 = cuts[k];
        const double w1 = cuts[k + 1];
        if (!(w1 > w0)) continue;
        const double ymid = a + g * 0.5 * (w0 + w1);
        if (!safe.contains(&ymid)) {
            segments.push_back({w0, w1, 0.0, 0.0});
            continue;
        }
        const double y0 = a + g * w0;
        const double y1 = a + g * w1;
        const double v0 = v_next.inside(&y0);
        const double v1 = v_next.inside(&y1);
        const double slope = (v1 - v0) / (w1 - w0);
        segments.push_back({w0, w1, slope, v0 - slope * w0});
    }
    return sip::Payoff::piecewise_linear(std::move(segments));
}

namespace {

std::string node_context(std::size_t stage, const Vector& x, std::size_t u) {
    std::ostringstream msg;
    msg << "stage " << stage << ", x = [" << x.transpose() << "], control " << u;
    return msg.str();
}

} // namespace

BackupResult backup(const ValueFunction& v_next, const Model& model,
                    const StageUncertainty& uncertainty, const BellmanOptions& options,
                    std::span<const std::size_t> allowed_controls) {
    if (v_next.stage() == 0) throw ConfigurationError("cannot back up from stage 0");
    const std::size_t stage = v_next.stage() - 1;
    const StateGrid& grid = v_next.grid();
    const Box& safe = model.safe_region;
    const Box& support = support_of(uncertainty);
    if (support.dim() != model.dynamics.disturbance_dim()) {
        throw ConfigurationError("disturbance support dimension does not match the dynamics");
    }

    const auto* robust = std::get_if<MomentAmbiguitySet>(&uncertainty);
    AtomSet atoms;
    if (!robust) {
        atoms = singleton(std::get<NominalDistribution>(uncertainty), options.nominal_atoms);
    }

    std::vector<double> values(grid.size(), 0.0);
    std::vector<std::int32_t> policy(grid.size(), 0);
    std::vector<std::size_t> iterations(grid.size(), 0);
    std::vector<std::uint8_t> unconverged(grid.size(), 0);
    std::vector<std::size_t> calls(grid.size(), 0);

    parallel_for(grid.size(), options.threads, [&](std::size_t k) {
        const Vector x = grid.node(k);
        std::vector<std::size_t> candidates = model.controls.admissible_indices(x);
        if (!allowed_controls.empty()) {
            std::erase_if(candidates, [&](std::size_t c) {
                return std::find(allowed_controls.begin(), allowed_controls.end(), c) ==
                       allowed_controls.end();
            });
        }
        if (candidates.empty()) {
            throw ConfigurationError("no admissible control at " + node_context(stage, x, 0));
        }
        policy[k] = static_cast<std::int32_t>(candidates.front());
        if (!safe.contains(x)) return;

        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t c : candidates) {
            const Vector& u = model.controls[c];
            double q = 0.0;
            if (robust) {
                try {
                    const sip::Payoff payoff = next_stage_payoff(v_next, model, x, u, support);
                    const sip::DualResult r = sip::dual_inner_value(payoff, *robust, options.sip);
                    q = r.value;
                    ++calls[k];
                    iterations[k] = std::max(iterations[k], r.certificate.iterations);
                    if (!r.certificate.converged) unconverged[k] = 1;
                } catch (const SolverError& e) {
                    throw SolverError(std::string(e.what()) + " at " + node_context(stage, x, c));
                }
            } else if (const auto lin = scalar_affine(model, x, u); lin && grid.dim() == 1) {
                for (std::size_t i = 0; i < atoms.size(); ++i) {
                    const double y = lin->offset + lin->gain * atoms.points[i];
                    q += atoms.weights[i] * v_next.at(&y);
                }
            } else {
                for (std::size_t i = 0; i < atoms.size(); ++i) {
                    const Vector w = Eigen::Map<const Vector>(atoms.point(i).data(),
                                                              static_cast<Eigen::Index>(atoms.dim));
                    q += atoms.weights[i] * v_next(model.dynamics.step(x, u, w));
                }
            }
            if (q > best) {
                best = q;
                policy[k] = static_cast<std::int32_t>(c);
            }
        }
        values[k] = std::clamp(best, 0.0, 1.0);
    });

    BackupDiagnostics diag;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        diag.sip_calls += calls[k];
        diag.max_iterations = std::max(diag.max_iterations, iterations[k]);
        diag.unconverged += unconverged[k];
    }
    return BackupResult{ValueFunction(stage, v_next.grid_ptr(), safe, std::move(values)),
                        std::move(policy), diag};
}

RecursionResult solve_recursion(const Model& model, const std::vector<StageUncertainty>& schedule,
                                std::shared_ptr<const StateGrid> grid,
                                const BellmanOptions& options,
                                std::span<const std::size_t> first_stage_controls) {
    const std::size_t horizon = model.horizon;
    if (horizon > 0 && schedule.size() != 1 && schedule.size() != horizon) {
        throw ConfigurationError("uncertainty schedule must have 1 or " +
                                 std::to_string(horizon) + " entries, got " +
                                 std::to_string(schedule.size()));
    }
    std::vector<Box> supports;
    for (const auto& s : schedule) supports.push_back(support_of(s));
    grid->check_envelope(model, supports);

    std::vector<ValueFunction> reversed;
    std::vector<std::vector<std::int32_t>> policies(horizon);
    std::vector<BackupDiagnostics> diagnostics(horizon);
    reversed.push_back(terminal(grid, model.safe_region, horizon));
    for (std::size_t t = horizon; t-- > 0;) {
        const StageUncertainty& u = schedule.size() == 1 ? schedule.front() : schedule[t];
        try {
            BackupResult r = backup(reversed.back(), model, u, options,
                                    t == 0 ? first_stage_controls
                                           : std::span<const std::size_t>{});
            policies[t] = std::move(r.policy);
            diagnostics[t] = r.diagnostics;
            reversed.push_back(std::move(r.value));
        } catch (const SolverError& e) {
            throw SolverError("recursion failed at stage " + std::to_string(t) + ": " + e.what());
        }
    }
    std::reverse(reversed.begin(), reversed.end());
    return RecursionResult{std::move(reversed), std::move(policies), std::move(diagnostics)};
}

} // namespace drsafe
