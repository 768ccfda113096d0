#include "drsafe/dual_sip.hpp"

#include "drsafe/errors.hpp"
#include "drsafe/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace drsafe::sip {

Payoff Payoff::piecewise_linear(std::vector<Segment> segments) {
    if (segments.empty()) throw ConfigurationError("piecewise-linear payoff has no segments");
    for (std::size_t k = 0; k < segments.size(); ++k) {
        if (!(segments[k].lo <= segments[k].hi)) {
            throw ConfigurationError("payoff segment has lo > hi");
        }
        if (k > 0 && segments[k].lo != segments[k - 1].hi) {
            throw ConfigurationError("payoff segments must tile an interval");
        }
    }
    Payoff p;
    p.dim_ = 1;
    p.segments_ = std::move(segments);
    return p;
}

Payoff Payoff::general(std::size_t dim, Fn fn) {
    if (dim == 0 || !fn) throw ConfigurationError("general payoff needs a dimension and a function");
    Payoff p;
    p.dim_ = dim;
    p.fn_ = std::move(fn);
    return p;
}

Payoff Payoff::constant(std::size_t dim, double value) {
    return general(dim, [value](std::span<const double>) { return value; });
}

namespace {

/// Index range [first, last] of segments whose closed interval contains w.
std::pair<std::size_t, std::size_t> containing(const std::vector<Segment>& segs, double w) {
    if (w <= segs.front().lo) return {0, 0};
    if (w >= segs.back().hi) return {segs.size() - 1, segs.size() - 1};
    auto it = std::upper_bound(segs.begin(), segs.end(), w,
                               [](double v, const Segment& s) { return v < s.lo; });
    std::size_t last = static_cast<std::size_t>(it - segs.begin()) - 1;
    std::size_t first = last;
    while (first > 0 && segs[first - 1].hi >= w) --first;
    return {first, last};
}

} // namespace

double Payoff::operator()(std::span<const double> w) const {
    if (fn_) return fn_(w);
    const auto [first, last] = containing(segments_, w[0]);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = first; k <= last; ++k) best = std::max(best, segments_[k].at(w[0]));
    return best;
}

double Payoff::lower(std::span<const double> w) const {
    if (fn_) return fn_(w);
    const auto [first, last] = containing(segments_, w[0]);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = first; k <= last; ++k) best = std::min(best, segments_[k].at(w[0]));
    return best;
}

Multipliers Multipliers::zero(std::size_t dim) {
    const auto l = static_cast<Eigen::Index>(dim);
    return Multipliers{Vector::Zero(l), Vector::Zero(l), Vector::Zero(l), 0.0};
}

double Multipliers::objective(const MomentAmbiguitySet& amb) const {
    double value = -amb.lower_offset().dot(lambda_lo) - amb.upper_offset().dot(lambda_hi) - nu;
    for (Eigen::Index i = 0; i < Lambda.size(); ++i) {
        value -= amb.scale() * amb.second_moment()(i, i) * Lambda[i];
    }
    return value;
}

double Multipliers::affine_part(const MomentAmbiguitySet& amb, std::span<const double> w) const {
    double value = nu;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double d = w[i] - amb.mean()[ii];
        value += w[i] * (lambda_hi[ii] - lambda_lo[ii]) + Lambda[ii] * d * d;
    }
    return value;
}

namespace {

double constraint_value(const Multipliers& mult, const Payoff& payoff,
                        const MomentAmbiguitySet& amb, std::span<const double> w) {
    return mult.affine_part(amb, w) + payoff.lower(w);
}

ViolatedPoint search_piecewise(const Multipliers& mult, const Payoff& payoff,
                               const MomentAmbiguitySet& amb) {
    const double curvature = mult.Lambda[0];
    const double linear = mult.lambda_hi[0] - mult.lambda_lo[0];
    const double m = amb.mean()[0];
    ViolatedPoint best{{0.0}, std::numeric_limits<double>::infinity()};
    auto consider = [&](double w, const Segment& s) {
        const double d = w - m;
        const double value = curvature * d * d + linear * w + mult.nu + s.at(w);
        if (value < best.residual || (value == best.residual && w < best.w[0])) {
            best.residual = value;
            best.w[0] = w;
        }
    };
    for (const Segment& s : payoff.segments()) {
        consider(s.lo, s);
        consider(s.hi, s);
        if (curvature > 0.0) {
            // stationary point of curvature (w-m)^2 + (linear + slope) w
            const double vertex = m - (linear + s.slope) / (2.0 * curvature);
            if (vertex > s.lo && vertex < s.hi) consider(vertex, s);
        }
    }
    return best;
}

template <class F>
double golden_section(F&& f, double a, double b, double tol) {
    constexpr double inv_phi = 0.6180339887498949;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    for (int it = 0; it < 200 && (b - a) > tol; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return fc < fd ? c : d;
}

ViolatedPoint search_scan(const Multipliers& mult, const Payoff& payoff,
                          const MomentAmbiguitySet& amb, const SipOptions& opts) {
    const std::size_t l = amb.dim();
    if (l > 2) {
        throw ConfigurationError("scan-based constraint search supports at most 2 disturbance "
                                 "dimensions");
    }
    const std::size_t n = std::max<std::size_t>(opts.scan_points, 2);
    const Box& box = amb.support();
    std::vector<double> step(l);
    std::vector<std::size_t> count(l);
    for (std::size_t i = 0; i < l; ++i) {
        count[i] = box.lo(i) == box.hi(i) ? 1 : n;
        step[i] = count[i] == 1 ? 0.0 : (box.hi(i) - box.lo(i)) / static_cast<double>(n - 1);
    }
    auto coord = [&](std::size_t i, std::size_t k) {
        return k + 1 == count[i] ? box.hi(i) : box.lo(i) + step[i] * static_cast<double>(k);
    };

    ViolatedPoint best{std::vector<double>(l), std::numeric_limits<double>::infinity()};
    std::vector<double> w(l);
    std::vector<std::size_t> idx(l, 0);
    std::size_t total = 1;
    for (std::size_t c : count) total *= c;
    for (std::size_t k = 0; k < total; ++k) {
        for (std::size_t i = 0; i < l; ++i) w[i] = coord(i, idx[i]);
        const double v = constraint_value(mult, payoff, amb, w);
        if (v < best.residual) {
            best.residual = v;
            best.w = w;
        }
        for (std::size_t i = l; i-- > 0;) {
            if (++idx[i] < count[i]) break;
            idx[i] = 0;
        }
    }

    // coordinate-wise golden-section refinement within one scan cell
    w = best.w;
    for (int sweep = 0; sweep < (l == 1 ? 1 : 3); ++sweep) {
        for (std::size_t i = 0; i < l; ++i) {
            if (step[i] == 0.0) continue;
            const double a = std::max(box.lo(i), w[i] - step[i]);
            const double b = std::min(box.hi(i), w[i] + step[i]);
            auto f = [&](double t) {
                std::vector<double> probe = w;
                probe[i] = t;
                return constraint_value(mult, payoff, amb, probe);
            };
            const double t = golden_section(f, a, b, opts.point_tol * std::max(1.0, b - a));
            const double v = f(t);
            if (v < best.residual) {
                w[i] = t;
                best.residual = v;
                best.w = w;
            }
        }
    }
    return best;
}

} // namespace

ViolatedPoint most_violated_point(const Multipliers& mult, const Payoff& payoff,
                                  const MomentAmbiguitySet& amb, const SipOptions& opts) {
    if (payoff.dim() != amb.dim()) {
        throw ConfigurationError("payoff dimension does not match ambiguity set");
    }
    if (payoff.is_piecewise_linear()) return search_piecewise(mult, payoff, amb);
    return search_scan(mult, payoff, amb, opts);
}

SubproblemResult solve_subproblem(const std::vector<std::vector<double>>& points,
                                  std::span<const double> payoffs,
                                  const MomentAmbiguitySet& amb) {
    if (points.empty()) throw ConfigurationError("subproblem needs at least one active point");
    if (points.size() != payoffs.size()) {
        throw ConfigurationError("one payoff per active point required");
    }
    const std::size_t l = amb.dim();
    // variables: lambda_lo (l), lambda_hi (l), Lambda diag (l), nu+, nu-
    const std::size_t nvars = 3 * l + 2;
    const std::size_t nu_pos = 3 * l;
    const std::size_t nu_neg = 3 * l + 1;

    lp::Problem prob;
    prob.num_vars = nvars;
    prob.objective.assign(nvars, 0.0);
    const Vector lo_off = amb.lower_offset();
    const Vector hi_off = amb.upper_offset();
    for (std::size_t i = 0; i < l; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        prob.objective[i] = lo_off[ii];
        prob.objective[l + i] = hi_off[ii];
        prob.objective[2 * l + i] = amb.scale() * amb.second_moment()(ii, ii);
    }
    prob.objective[nu_pos] = 1.0;
    prob.objective[nu_neg] = -1.0;

    for (std::size_t k = 0; k < points.size(); ++k) {
        std::vector<double> row(nvars, 0.0);
        for (std::size_t i = 0; i < l; ++i) {
            const double w = points[k][i];
            const double d = w - amb.mean()[static_cast<Eigen::Index>(i)];
            row[i] = w;
            row[l + i] = -w;
            row[2 * l + i] = -d * d;
        }
        row[nu_pos] = -1.0;
        row[nu_neg] = 1.0;
        prob.add_row(std::move(row), lp::Relation::LessEqual, payoffs[k]);
    }

    const lp::Solution sol = lp::solve(prob);
    SubproblemResult out;
    out.multipliers = Multipliers::zero(l);
    if (sol.status == lp::Status::Unbounded) {
        out.bounded = false;
        return out;
    }
    if (sol.status != lp::Status::Optimal) {
        throw SolverError("dual subproblem LP failed: " + lp::to_string(sol.status));
    }
    for (std::size_t i = 0; i < l; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        out.multipliers.lambda_lo[ii] = sol.x[i];
        out.multipliers.lambda_hi[ii] = sol.x[l + i];
        out.multipliers.Lambda[ii] = sol.x[2 * l + i];
    }
    out.multipliers.nu = sol.x[nu_pos] - sol.x[nu_neg];
    out.objective = out.multipliers.objective(amb);
    return out;
}

namespace {

std::vector<std::vector<double>> initial_points(const MomentAmbiguitySet& amb) {
    std::vector<std::vector<double>> pts;
    auto push_unique = [&pts](std::vector<double> p) {
        if (std::find(pts.begin(), pts.end(), p) == pts.end()) pts.push_back(std::move(p));
    };
    for (const Vector& c : amb.support().corners()) {
        push_unique(std::vector<double>(c.data(), c.data() + c.size()));
    }
    const Vector mid = amb.support().midpoint();
    push_unique(std::vector<double>(mid.data(), mid.data() + mid.size()));
    return pts;
}

} // namespace

DualResult dual_inner_value(const Payoff& payoff, const MomentAmbiguitySet& amb,
                            const SipOptions& opts) {
    if (payoff.dim() != amb.dim()) {
        throw ConfigurationError("payoff dimension does not match ambiguity set");
    }
    if (payoff.is_piecewise_linear()) {
        const auto& segs = payoff.segments();
        if (segs.front().lo != amb.support().lo(0) || segs.back().hi != amb.support().hi(0)) {
            throw ConfigurationError("piecewise-linear payoff must tile the support interval");
        }
    }

    std::vector<std::vector<double>> points = initial_points(amb);
    std::vector<double> values;
    values.reserve(points.size());
    for (const auto& p : points) values.push_back(payoff.lower(p));

    DualCertificate cert;
    bool reseeded = false;
    SubproblemResult sub;
    ViolatedPoint worst;
    while (true) {
        sub = solve_subproblem(points, values, amb);
        if (!sub.bounded) {
            if (reseeded) {
                throw SolverError("dual relaxation unbounded after reseeding with a feasible "
                                  "atom set");
            }
            // The feasibility witness is a primal-feasible distribution, so its
            // support points make the relaxation bounded.
            const AtomSet& wit = amb.witness();
            for (std::size_t k = 0; k < wit.size(); ++k) {
                std::vector<double> p(wit.point(k).begin(), wit.point(k).end());
                if (std::find(points.begin(), points.end(), p) != points.end()) continue;
                values.push_back(payoff.lower(p));
                points.push_back(std::move(p));
            }
            reseeded = true;
            continue;
        }
        ++cert.iterations;
        cert.objective_history.push_back(sub.objective);
        worst = most_violated_point(sub.multipliers, payoff, amb, opts);
        if (worst.residual >= -opts.feas_tol) {
            cert.converged = true;
            break;
        }
        if (cert.iterations >= opts.max_iterations) break;
        const bool repeated = std::any_of(points.begin(), points.end(), [&](const std::vector<double>& p) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                if (std::abs(p[i] - worst.w[i]) > opts.point_tol) return false;
            }
            return true;
        });
        if (repeated) {
            cert.converged = true;
            cert.stalled = true;
            break;
        }

        std::vector<std::vector<double>> kept;
        std::vector<double> kept_values;
        for (std::size_t k = 0; k < points.size(); ++k) {
            const double slack = sub.multipliers.affine_part(amb, points[k]) + values[k];
            if (slack <= opts.prune_slack) {
                kept.push_back(std::move(points[k]));
                kept_values.push_back(values[k]);
            }
        }
        kept_values.push_back(payoff.lower(worst.w));
        kept.push_back(worst.w);
        points = std::move(kept);
        values = std::move(kept_values);
    }

    cert.multipliers = sub.multipliers;
    cert.residual = worst.residual;
    const double shift = std::max(0.0, -worst.residual);
    cert.multipliers.nu += shift;
    cert.raw_objective = sub.objective - shift;
    cert.active_points = std::move(points);

    DualResult result;
    result.value = std::clamp(cert.raw_objective, 0.0, 1.0);
    result.certificate = std::move(cert);
    return result;
}

double verify_certificate(const Multipliers& mult, const Payoff& payoff,
                          const MomentAmbiguitySet& amb, std::size_t points_per_dim) {
    const std::size_t l = amb.dim();
    const std::size_t n = std::max<std::size_t>(points_per_dim, 2);
    const Box& box = amb.support();
    std::vector<std::size_t> idx(l, 0);
    std::size_t total = 1;
    for (std::size_t i = 0; i < l; ++i) total *= n;
    std::vector<double> w(l);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < total; ++k) {
        for (std::size_t i = 0; i < l; ++i) {
            w[i] = idx[i] + 1 == n ? box.hi(i)
                                   : box.lo(i) + (box.hi(i) - box.lo(i)) *
                                                     (static_cast<double>(idx[i]) /
                                                      static_cast<double>(n - 1));
        }
        best = std::min(best, constraint_value(mult, payoff, amb, w));
        for (std::size_t i = l; i-- > 0;) {
            if (++idx[i] < n) break;
            idx[i] = 0;
        }
    }
    return best;
}

} // namespace drsafe::sip
