#include "drsafe/commands.hpp"

#include "drsafe/errors.hpp"
#include "drsafe/io.hpp"
#include "drsafe/oracle.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>

namespace drsafe::cli {

namespace fs = std::filesystem;
using config::Mode;
using config::RunConfig;

namespace {

std::string stage_file(const char* prefix, std::size_t t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%03zu.csv", prefix, t);
    return buf;
}

std::vector<std::string> coordinate_names(std::size_t n) {
    if (n == 1) return {"x"};
    std::vector<std::string> out;
    for (std::size_t i = 1; i <= n; ++i) out.push_back("x" + std::to_string(i));
    return out;
}

std::vector<std::string> with(std::vector<std::string> a, std::initializer_list<std::string> tail) {
    a.insert(a.end(), tail);
    return a;
}

std::vector<std::string> with(std::initializer_list<std::string> head, std::vector<std::string> b) {
    std::vector<std::string> a(head);
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

void coordinates(io::Csv& csv, const Vector& x) {
    for (Eigen::Index i = 0; i < x.size(); ++i) csv.cell(x[i]);
}

std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

const char* branch_name(Branch b) { return b == Branch::Safe ? "safe" : "fallback"; }

std::vector<Mode> modes_of(Mode mode) {
    if (mode == Mode::Compare) return {Mode::Robust, Mode::Nominal};
    return {mode};
}

fs::path mode_dir(const fs::path& out, Mode requested, Mode mode) {
    return requested == Mode::Compare ? out / config::to_string(mode) : out;
}

std::size_t random_index(std::mt19937_64& e, std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform01(e) * static_cast<double>(n)));
}

} // namespace

RunConfig resolve(const Options& options) {
    RunConfig cfg = options.config ? config::load(*options.config) : config::validate(config::RawConfig{"<defaults>", {}});
    if (options.threads) {
        if (*options.threads == 0) throw ConfigurationError("--threads must be at least 1");
        cfg.threads = *options.threads;
    }
    if (options.seed) {
        cfg.simulate.seed = *options.seed;
        cfg.audit.seed = *options.seed;
    }
    if (options.alpha) {
        if (!(*options.alpha > 0 && *options.alpha <= 1)) throw ConfigurationError("--alpha must lie in (0, 1]");
        cfg.policy.alpha = *options.alpha;
    }
    if (options.mode) cfg.mode = *options.mode;
    return cfg;
}

Solution solve(const RunConfig& cfg, Mode mode, const fs::path& out, std::ostream& log) {
    if (mode == Mode::Compare) throw std::logic_error("solve takes a single mode");
    Solution s;
    s.model = std::make_shared<const Model>(config::build_model(cfg));
    s.grid = config::build_grid(cfg, *s.model);
    const std::string key = config::canonical_solve(cfg, mode);
    const std::string hash = config::hex(config::fnv1a(key));
    const fs::path cache = io::cache_dir(out) / (hash + ".bin");
    const std::string label = "solve[" + config::to_string(mode) + "]";

    if (auto cached = io::load_solution(cache, key, s.grid, s.model->safe_region)) {
        log << label << ": cache hit " << hash << ", no recomputation\n";
        s.result = std::move(*cached);
        s.cache_hit = true;
        return s;
    }
    BellmanOptions opt;
    opt.threads = cfg.threads;
    s.result = solve_recursion(*s.model, config::build_schedule(cfg, mode), s.grid, opt);
    std::size_t calls = 0, unconverged = 0;
    for (const auto& d : s.result.diagnostics) {
        calls += d.sip_calls;
        unconverged += d.unconverged;
    }
    log << label << ": computed " << s.result.values.size() << " value functions on " << s.grid->size()
        << " nodes (" << calls << " exchange calls, " << unconverged << " unconverged)\n";
    try {
        io::save_solution(cache, key, s.result);
        log << label << ": cached as " << cache.string() << "\n";
    } catch (const std::exception& e) {
        log << label << ": warning: cache not written: " << e.what() << "\n";
    }
    return s;
}

void write_solution(const Solution& s, const fs::path& dir) {
    const StateGrid& grid = *s.grid;
    const auto names = coordinate_names(grid.dim());
    const auto& controls = s.model->controls;
    std::vector<std::string> unames;
    for (std::size_t i = 0; i < controls.dim(); ++i) unames.push_back(controls.dim() == 1 ? "u" : "u" + std::to_string(i + 1));

    for (std::size_t t = 0; t < s.result.values.size(); ++t) {
        io::Csv csv(with(names, {"v"}));
        for (std::size_t k = 0; k < grid.size(); ++k) {
            coordinates(csv, grid.node(k));
            csv.cell(s.result.values[t].node_value(k)).end_row();
        }
        csv.write(dir / stage_file("v", t));
    }
    for (std::size_t t = 0; t < s.result.policies.size(); ++t) {
        auto header = with(names, {"control"});
        header.insert(header.end(), unames.begin(), unames.end());
        io::Csv csv(header);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            coordinates(csv, grid.node(k));
            const auto u = static_cast<std::size_t>(s.result.policies[t][k]);
            csv.cell(u);
            coordinates(csv, controls[u]);
            csv.end_row();
        }
        csv.write(dir / stage_file("phi", t));
    }
}

std::vector<SweepPoint> sweep(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    std::vector<SweepPoint> points;
    for (double b : cfg.sweep.b) {
        for (double c : cfg.sweep.c) {
            SweepPoint p{b, c, false, {}, {}};
            RunConfig pair = cfg;
            auto apply = [&](config::AmbiguityConfig& a) {
                a.mean_tol.setConstant(b);
                a.scale = c;
            };
            apply(pair.ambiguity);
            for (auto& a : pair.stage_ambiguity) apply(a);
            try {
                const Solution s = solve(pair, Mode::Robust, out, log);
                p.v0 = s.result.values.front().values();
                p.ok = true;
            } catch (const std::exception& e) {
                p.error = e.what();
                log << "sweep: b=" << b << " c=" << c << " failed: " << e.what() << "\n";
            }
            points.push_back(std::move(p));
        }
    }
    return points;
}

AuditRow audit_instance(const sip::Payoff& payoff, const MomentAmbiguitySet& amb) {
    AuditRow row;
    const sip::DualResult dual = sip::dual_inner_value(payoff, amb, bellman_sip_defaults());
    const auto& cert = dual.certificate;
    row.dual = dual.value;
    row.converged = cert.converged;
    row.stalled = cert.stalled;
    row.iterations = cert.iterations;
    for (std::size_t k = 1; k < cert.objective_history.size(); ++k) {
        if (cert.objective_history[k] > cert.objective_history[k - 1] + 1e-10) row.history_monotone = false;
    }
    const std::size_t l = amb.dim();
    const std::size_t verify = l == 1 ? 4 * 2048 + 1 : 4 * 64 + 1;
    row.certificate_residual = sip::verify_certificate(cert.multipliers, payoff, amb, verify);

    if (l == 1) row.cells = {64, 512, 4096};
    else if (l == 2) row.cells = {8, 16, 32};
    for (std::size_t cells : row.cells) {
        AtomSet atoms = oracle::product_grid(amb.support(), cells);
        std::vector<double> g;
        if (payoff.is_piecewise_linear()) {
            std::vector<double> w = atoms.points;
            for (const auto& s : payoff.segments()) w.push_back(s.lo);
            std::sort(w.begin(), w.end());
            w.erase(std::unique(w.begin(), w.end()), w.end());
            atoms.points = w;
            for (double x : w) g.push_back(payoff.lower(x));
        } else {
            for (std::size_t k = 0; k < atoms.points.size() / l; ++k) g.push_back(payoff(atoms.point(k)));
        }
        atoms.weights.assign(g.size(), 0.0);
        const double primal = oracle::primal_on_atoms(amb.spec(), atoms, g).value;
        row.primal.push_back(primal);
        if (row.dual > primal + 1e-6) ++row.weak_violations;
    }
    row.gap = row.primal.empty() ? std::numeric_limits<double>::quiet_NaN() : row.primal.back() - row.dual;
    return row;
}

std::vector<AuditRow> audit(const RunConfig& cfg, const Solution& robust) {
    std::vector<AuditRow> rows;
    const Model& model = *robust.model;
    if (model.horizon == 0) return rows;
    const auto schedule = config::build_schedule(cfg, Mode::Robust);
    const Box& a = model.safe_region;
    for (std::size_t i = 0; i < cfg.audit.samples; ++i) {
        auto e = trajectory_engine(cfg.audit.seed, i);
        const std::size_t t = random_index(e, model.horizon);
        Vector x(static_cast<Eigen::Index>(a.dim()));
        for (std::size_t d = 0; d < a.dim(); ++d) x[static_cast<Eigen::Index>(d)] = a.lo(d) + uniform01(e) * (a.hi(d) - a.lo(d));
        auto admissible = model.controls.admissible_indices(x);
        if (admissible.empty()) continue;
        const std::size_t u = admissible[random_index(e, admissible.size())];
        const auto& amb = std::get<MomentAmbiguitySet>(schedule.size() == 1 ? schedule[0] : schedule[t]);
        const sip::Payoff payoff = next_stage_payoff(robust.result.values[t + 1], model, x, model.controls[u], amb.support());
        AuditRow row;
        try {
            row = audit_instance(payoff, amb);
        } catch (const SolverError&) {
            row.dual = std::numeric_limits<double>::quiet_NaN();
            row.gap = std::numeric_limits<double>::quiet_NaN();
            row.converged = false;
        }
        row.stage = t;
        row.x = x;
        row.control = u;
        rows.push_back(std::move(row));
    }
    return rows;
}

SafetyOrientedController controller(const RunConfig& cfg, const Solution& s) {
    return SafetyOrientedController(s.model, threshold(s.result.values, cfg.policy.alpha), s.result.policies,
                                    FallbackPolicy::constant(cfg.policy.fallback), config::build_supports(cfg));
}

std::vector<SimulationRun> simulate(const RunConfig& cfg, const fs::path& out, std::ostream& log,
                                    bool keep_trajectories) {
    const NominalDistribution truth = config::build_distribution(cfg.simulate.truth, cfg.ambiguity);
    for (const Box& w : config::build_supports(cfg)) {
        if (!support_within(truth, w)) {
            log << "simulate: warning: the true distribution's support is not inside W_t\n";
            break;
        }
    }
    std::vector<SimulationRun> runs;
    for (Mode mode : modes_of(cfg.mode)) {
        const Solution s = solve(cfg, mode, out, log);
        const SafetyOrientedController c = controller(cfg, s);
        MonteCarloOptions opt;
        opt.threads = cfg.threads;
        opt.keep_trajectories = keep_trajectories;
        SimulationRun run{config::to_string(mode),
                          monte_carlo(*s.model, as_policy(c), truth, cfg.simulate.x0, cfg.simulate.samples,
                                      cfg.simulate.seed, opt)};
        log << "simulate[" << run.name << "]: " << run.report.safe_count << "/" << run.report.samples
            << " trajectories safe, probability " << run.report.probability << "\n";
        runs.push_back(std::move(run));
    }
    return runs;
}

int cmd_solve(const Options& options, std::ostream& log) {
    const RunConfig cfg = resolve(options);
    for (Mode mode : modes_of(cfg.mode)) {
        const Solution s = solve(cfg, mode, options.out, log);
        write_solution(s, mode_dir(options.out, cfg.mode, mode));
    }
    return 0;
}

int cmd_sweep(const Options& options, std::ostream& log) {
    const RunConfig cfg = resolve(options);
    const auto points = sweep(cfg, options.out, log);
    const Model model = config::build_model(cfg);
    const auto grid = config::build_grid(cfg, model);
    const auto names = coordinate_names(grid->dim());
    io::Csv values(with({"b", "c"}, with(names, {"v0"})));
    io::Csv status({"b", "c", "status", "message"});
    std::size_t ok = 0;
    for (const auto& p : points) {
        status.cell(p.b).cell(p.c).cell(std::string(p.ok ? "ok" : "failed")).cell(quoted(p.error)).end_row();
        if (!p.ok) continue;
        ++ok;
        for (std::size_t k = 0; k < grid->size(); ++k) {
            values.cell(p.b).cell(p.c);
            coordinates(values, grid->node(k));
            values.cell(p.v0[k]).end_row();
        }
    }
    values.write(options.out / "sweep.csv");
    status.write(options.out / "sweep_status.csv");
    log << "sweep: " << ok << "/" << points.size() << " pairs solved\n";
    return ok > 0 ? 0 : 1;
}

int cmd_audit(const Options& options, std::ostream& log) {
    const RunConfig cfg = resolve(options);
    const Solution s = solve(cfg, Mode::Robust, options.out, log);
    const auto rows = audit(cfg, s);
    const auto names = coordinate_names(s.grid->dim());
    std::vector<std::string> header = with({"sample", "t"}, with(names, {"u", "dual"}));
    const std::vector<std::size_t> cells = rows.empty() ? std::vector<std::size_t>{} : rows.front().cells;
    for (std::size_t n : cells) header.push_back("primal_" + std::to_string(n));
    for (const char* h : {"gap", "weak_violations", "converged", "stalled", "iterations", "history_monotone",
                          "certificate_residual", "flag"}) {
        header.emplace_back(h);
    }
    io::Csv csv(header);
    double max_gap = 0;
    std::size_t weak = 0, flagged = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const AuditRow& r = rows[i];
        csv.cell(i).cell(r.stage);
        coordinates(csv, r.x);
        csv.cell(r.control).cell(r.dual);
        for (std::size_t k = 0; k < cells.size(); ++k) {
            csv.cell(k < r.primal.size() ? r.primal[k] : std::numeric_limits<double>::quiet_NaN());
        }
        const bool flag = !r.converged || !r.history_monotone || r.certificate_residual < -1e-6 || r.weak_violations;
        csv.cell(r.gap).cell(r.weak_violations).cell(std::size_t{r.converged}).cell(std::size_t{r.stalled});
        csv.cell(r.iterations).cell(std::size_t{r.history_monotone}).cell(r.certificate_residual);
        csv.cell(std::string(flag ? "check" : "ok")).end_row();
        if (std::isfinite(r.gap)) max_gap = std::max(max_gap, std::abs(r.gap));
        weak += r.weak_violations;
        flagged += flag;
    }
    csv.write(options.out / "audit.csv");
    log << "audit: " << rows.size() << " instances, max |gap| " << max_gap << ", weak-duality violations " << weak
        << ", flagged rows " << flagged << "\n";
    return 0;
}

int cmd_simulate(const Options& options, std::ostream& log) {
    const RunConfig cfg = resolve(options);
    const auto runs = simulate(cfg, options.out, log, options.trajectories);
    io::Csv report({"controller", "samples", "safe_count", "probability", "seed"});
    io::Csv quantiles({"controller", "t", "min", "q1", "median", "q3", "max"});
    for (const auto& r : runs) {
        report.cell(r.name).cell(r.report.samples).cell(r.report.safe_count).cell(r.report.probability);
        report.cell(std::to_string(r.report.seed)).end_row();
        for (std::size_t t = 0; t < r.report.stage_quantiles.size(); ++t) {
            quantiles.cell(r.name).cell(t);
            for (double q : r.report.stage_quantiles[t]) quantiles.cell(q);
            quantiles.end_row();
        }
        if (!options.trajectories) continue;
        const std::size_t n = cfg.simulate.x0.size();
        io::Csv traj(with({"sample", "t"}, with(coordinate_names(n), {"u", "branch"})));
        for (std::size_t i = 0; i < r.report.trajectories.size(); ++i) {
            const Trajectory& tr = r.report.trajectories[i];
            for (std::size_t t = 0; t < tr.states.size(); ++t) {
                traj.cell(i).cell(t);
                coordinates(traj, tr.states[t]);
                if (t < tr.controls.size()) traj.cell(tr.controls[t]).cell(std::string(branch_name(tr.branches[t])));
                else traj.cell(std::string()).cell(std::string());
                traj.end_row();
            }
        }
        traj.write(options.out / ("trajectories_" + r.name + ".csv"));
    }
    report.write(options.out / "report.csv");
    quantiles.write(options.out / "quantiles.csv");
    return 0;
}

int cmd_safeset(const Options& options, std::ostream& log) {
    const RunConfig cfg = resolve(options);
    for (Mode mode : modes_of(cfg.mode)) {
        const Solution s = solve(cfg, mode, options.out, log);
        const SafetyOrientedController c = controller(cfg, s);
        const StateGrid& grid = *s.grid;
        const auto names = coordinate_names(grid.dim());
        io::Csv sets(with({"t", "node"}, with(names, {"member"})));
        io::Csv actions(with({"t", "node"}, with(names, {"branch", "u"})));
        std::size_t members0 = 0;
        for (std::size_t t = 0; t < s.result.values.size(); ++t) {
            for (std::size_t k = 0; k < grid.size(); ++k) {
                const bool member = c.sets().node_member(t, k);
                if (t == 0) members0 += member;
                sets.cell(t).cell(k);
                coordinates(sets, grid.node(k));
                sets.cell(std::size_t{member}).end_row();
                if (t + 1 == s.result.values.size()) continue;
                const Action a = c.act(grid.node(k), t);
                actions.cell(t).cell(k);
                coordinates(actions, grid.node(k));
                actions.cell(std::string(branch_name(a.branch))).cell(a.control).end_row();
            }
        }
        const fs::path dir = mode_dir(options.out, cfg.mode, mode);
        sets.write(dir / "safeset.csv");
        actions.write(dir / "controller.csv");
        log << "safeset[" << config::to_string(mode) << "]: alpha " << cfg.policy.alpha << ", " << members0
            << " nodes in S_0\n";
    }
    return 0;
}

int run(int argc, const char* const* argv, std::ostream& log) {
    CLI::App app{"Distributionally robust safe sets for finite-horizon stochastic safety"};
    app.require_subcommand(1);
    Options options;
    std::string mode_text;
    std::string config_path;
    std::string out_path = "out";
    std::size_t threads = 0;
    std::uint64_t seed = 0;
    double alpha = 0;

    struct Command {
        const char* name;
        const char* help;
        int (*fn)(const Options&, std::ostream&);
    };
    const Command commands[] = {
        {"solve", "compute value functions v_t and maximizing controls phi_t", cmd_solve},
        {"sweep", "solve over the b x c grid of the [sweep] section", cmd_sweep},
        {"audit", "compare dual values with the primal oracle at random (t, x, u)", cmd_audit},
        {"simulate", "Monte Carlo closed loop of the safety-oriented controller", cmd_simulate},
        {"safeset", "export the alpha-safe sets and the controller's actions", cmd_safeset},
    };
    std::vector<std::pair<CLI::App*, const Command*>> subs;
    for (const auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", config_path, "config file (TCL defaults if omitted)");
        sub->add_option("--out", out_path, "output directory")->capture_default_str();
        sub->add_option("--threads", threads, "worker threads (overrides [run] threads)");
        sub->add_option("--seed", seed, "random seed (overrides [simulate] and [audit] seeds)");
        sub->add_option("--alpha", alpha, "safety level (overrides [policy] alpha)");
        sub->add_option("--mode", mode_text, "robust, nominal or compare (overrides [run] mode)");
        if (std::string(c.name) == "simulate") {
            sub->add_flag("--trajectories", options.trajectories, "also write every trajectory");
        }
        subs.emplace_back(sub, &c);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    for (const auto& [sub, command] : subs) {
        if (!sub->parsed()) continue;
        try {
            if (sub->count("--config")) options.config = config_path;
            options.out = out_path;
            if (sub->count("--threads")) options.threads = threads;
            if (sub->count("--seed")) options.seed = seed;
            if (sub->count("--alpha")) options.alpha = alpha;
            if (sub->count("--mode")) options.mode = config::parse_mode(mode_text);
            return command->fn(options, log);
        } catch (const ConfigurationError& e) {
            log << "drsafe " << command->name << ": configuration error: " << e.what() << "\n";
            return 2;
        } catch (const std::exception& e) {
            log << "drsafe " << command->name << ": error: " << e.what() << "\n";
            return 1;
        }
    }
    return 2;
}

} // namespace drsafe::cli
