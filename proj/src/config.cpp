#include "drsafe/config.hpp"

#include "drsafe/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace drsafe::config {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
    });
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt(const Vector& v) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s;
}

std::string fmt(const Matrix& m) {
    std::string s;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (i) s += ";";
        for (Eigen::Index j = 0; j < m.cols(); ++j) s += (j ? "," : "") + fmt(m(i, j));
    }
    return s;
}

template <class T>
std::string fmt_list(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        if constexpr (std::is_floating_point_v<T>) s += fmt(v[i]);
        else s += std::to_string(v[i]);
    }
    return s;
}

/// Reads typed values out of one section and remembers which keys were used.
class Section {
public:
    Section(const RawConfig& raw, std::string name) : raw_(raw), name_(std::move(name)) {
        const auto it = raw.sections.find(name_);
        if (it != raw.sections.end()) entries_ = &it->second;
    }

    bool has(const std::string& key) const { return entries_ && entries_->count(key); }

    [[noreturn]] void fail(const std::string& key, const std::string& message) const {
        std::string where = raw_.source;
        if (has(key)) where += ":" + std::to_string(entries_->at(key).line);
        throw ConfigurationError(where + ": [" + name_ + "] " + key + ": " + message);
    }

    const std::string& text(const std::string& key) {
        used_.insert(key);
        return entries_->at(key).value;
    }

    std::string word(const std::string& key, const std::string& fallback) {
        return has(key) ? text(key) : fallback;
    }

    double number(const std::string& key, double fallback) {
        return has(key) ? parse_number(key, text(key)) : fallback;
    }

    std::uint64_t integer(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const std::string& s = text(key);
        std::uint64_t v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) fail(key, "expected a nonnegative integer, got '" + s + "'");
        return v;
    }

    std::vector<double> list(const std::string& key) {
        std::vector<double> out;
        for (const auto& item : split(text(key), ',')) out.push_back(parse_number(key, item));
        return out;
    }

    Vector vector(const std::string& key) {
        const auto v = list(key);
        return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    }

    Matrix matrix(const std::string& key) {
        std::vector<std::vector<double>> rows;
        for (const auto& row : split(text(key), ';')) {
            std::vector<double> r;
            for (const auto& item : split(row, ',')) r.push_back(parse_number(key, item));
            if (!rows.empty() && r.size() != rows.front().size()) fail(key, "matrix rows differ in length");
            rows.push_back(std::move(r));
        }
        Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = 0; j < rows[i].size(); ++j) {
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
            }
        }
        return m;
    }

    /// Scalar broadcast to `dim` components, or a list of exactly `dim` values.
    Vector sized(const std::string& key, std::size_t dim) {
        Vector v = vector(key);
        if (v.size() == 1 && dim > 1) return Vector::Constant(static_cast<Eigen::Index>(dim), v[0]);
        if (static_cast<std::size_t>(v.size()) != dim) {
            fail(key, "expected " + std::to_string(dim) + " values, got " + std::to_string(v.size()));
        }
        return v;
    }

    void check_unused() const {
        if (!entries_) return;
        for (const auto& [key, entry] : *entries_) {
            if (!used_.count(key)) {
                throw ConfigurationError(raw_.source + ":" + std::to_string(entry.line) + ": [" + name_ +
                                         "] unknown key '" + key + "'");
            }
        }
    }

private:
    double parse_number(const std::string& key, const std::string& s) const {
        double v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
            fail(key, "expected a number, got '" + s + "'");
        }
        return v;
    }

    const RawConfig& raw_;
    std::string name_;
    const std::map<std::string, Entry>* entries_ = nullptr;
    std::set<std::string> used_;
};

const std::set<std::string> kSections = {"model", "grid", "ambiguity", "nominal", "policy",
                                         "sweep", "simulate", "audit", "run"};

void read_ambiguity(Section& s, AmbiguityConfig& amb, std::size_t l) {
    if (s.has("mean")) amb.mean = s.sized("mean", l);
    if (s.has("mean_tol")) amb.mean_tol = s.sized("mean_tol", l);
    if (s.has("scale")) amb.scale = s.number("scale", 1.0);
    if (s.has("variance")) {
        const Matrix m = s.matrix("variance");
        if (m.rows() == 1 && m.cols() == static_cast<Eigen::Index>(l)) {
            amb.second_moment = m.row(0).transpose().asDiagonal();
        } else if (m.rows() == 1 && m.cols() == 1) {
            amb.second_moment = Matrix::Identity(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(l)) * m(0, 0);
        } else if (m.rows() == static_cast<Eigen::Index>(l) && m.cols() == static_cast<Eigen::Index>(l)) {
            amb.second_moment = m;
        } else {
            s.fail("variance", "expected a scalar, " + std::to_string(l) + " diagonal values or an " +
                                   std::to_string(l) + "x" + std::to_string(l) + " matrix");
        }
    }
    const bool explicit_box = s.has("support_lo") || s.has("support_hi");
    if (explicit_box) {
        if (!(s.has("support_lo") && s.has("support_hi"))) {
            s.fail(s.has("support_lo") ? "support_lo" : "support_hi", "support_lo and support_hi go together");
        }
        if (s.has("support")) s.fail("support", "give either support or support_lo/support_hi");
        amb.support_lo = s.sized("support_lo", l);
        amb.support_hi = s.sized("support_hi", l);
    } else if (s.has("support") || amb.support_lo.size() == 0) {
        const std::string kind = s.word("support", "uniform");
        if (kind != "uniform" && kind != "literal") s.fail("support", "expected uniform or literal, got '" + kind + "'");
        amb.support_lo.resize(static_cast<Eigen::Index>(l));
        amb.support_hi.resize(static_cast<Eigen::Index>(l));
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(l); ++i) {
            const double var = amb.second_moment(i, i);
            const double half = kind == "uniform" ? std::sqrt(3.0 * var) : 0.5 * std::sqrt(var / 12.0);
            amb.support_lo[i] = amb.mean[i] - half;
            amb.support_hi[i] = amb.mean[i] + half;
        }
    }
}

void read_distribution(Section& s, const std::string& prefix, DistributionConfig& d, const AmbiguityConfig& amb) {
    const std::size_t l = static_cast<std::size_t>(amb.mean.size());
    d.kind = s.word(prefix + "kind", d.kind);
    if (d.kind != "uniform" && d.kind != "truncated_normal") {
        s.fail(prefix + "kind", "expected uniform or truncated_normal, got '" + d.kind + "'");
    }
    d.mean = s.has(prefix + "mean") ? s.sized(prefix + "mean", l) : amb.mean;
    if (s.has(prefix + "stddev")) {
        d.stddev = s.sized(prefix + "stddev", l);
        if ((d.stddev.array() < 0).any()) s.fail(prefix + "stddev", "must be nonnegative");
    } else {
        d.stddev = (amb.second_moment.diagonal() / 2.0).cwiseSqrt();
    }
}

void check_ambiguity(Section& s, const AmbiguityConfig& amb) {
    if ((amb.support_lo.array() > amb.support_hi.array()).any()) s.fail("support_lo", "support_lo exceeds support_hi");
    try {
        MomentSpec{Box(amb.support_lo, amb.support_hi), amb.mean, amb.mean_tol, amb.second_moment, amb.scale}.validate();
    } catch (const ConfigurationError& e) {
        s.fail("variance", e.what());
    }
    const auto report = check_feasible(
        MomentSpec{Box(amb.support_lo, amb.support_hi), amb.mean, amb.mean_tol, amb.second_moment, amb.scale});
    if (!report.feasible) s.fail("mean", "ambiguity set is empty (no distribution on the support meets the moment bounds)");
}

} // namespace

RawConfig parse(const std::string& text, const std::string& source) {
    RawConfig raw;
    raw.source = source;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t number = 0;
    auto error = [&](const std::string& msg) {
        throw ConfigurationError(source + ":" + std::to_string(number) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') error("unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            const std::string base = section.substr(0, section.find('.'));
            if (!kSections.count(base)) error("unknown section [" + section + "]");
            if (base != section && base != "ambiguity") error("only [ambiguity.<stage>] takes a suffix");
            if (raw.sections.count(section)) error("duplicate section [" + section + "]");
            raw.sections[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) error("expected key = value");
        if (section.empty()) error("key outside of any section");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!valid_name(key)) error("invalid key '" + key + "'");
        if (value.empty()) error("empty value for '" + key + "'");
        auto& entries = raw.sections[section];
        if (entries.count(key)) {
            error("duplicate key '" + key + "' (first on line " + std::to_string(entries[key].line) + ")");
        }
        entries[key] = Entry{value, number};
    }
    return raw;
}

RawConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot read config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
}

std::string to_string(Mode mode) {
    switch (mode) {
    case Mode::Robust: return "robust";
    case Mode::Nominal: return "nominal";
    case Mode::Compare: return "compare";
    }
    return "robust";
}

Mode parse_mode(const std::string& text) {
    if (text == "robust") return Mode::Robust;
    if (text == "nominal") return Mode::Nominal;
    if (text == "compare") return Mode::Compare;
    throw ConfigurationError("mode must be robust, nominal or compare, got '" + text + "'");
}

RunConfig validate(const RawConfig& raw) {
    RunConfig cfg;

    Section model(raw, "model");
    cfg.model.preset = model.word("preset", "tcl");
    const bool tcl = cfg.model.preset == "tcl";
    if (!tcl && cfg.model.preset != "affine") model.fail("preset", "expected tcl or affine, got '" + cfg.model.preset + "'");

    std::size_t n = 1, l = 1;
    if (tcl) {
        TclParameters& p = cfg.model.tcl;
        p.resistance = model.number("resistance", p.resistance);
        p.capacitance = model.number("capacitance", p.capacitance);
        p.ambient = model.number("ambient", p.ambient);
        p.step_hours = model.number("step_hours", p.step_hours);
        p.power = model.number("power", p.power);
        p.efficiency = model.number("efficiency", p.efficiency);
        if (!(p.resistance > 0)) model.fail("resistance", "must be positive");
        if (!(p.capacitance > 0)) model.fail("capacitance", "must be positive");
        if (!(p.step_hours > 0)) model.fail("step_hours", "must be positive");
        cfg.model.controls = {Vector::Constant(1, 0.0), Vector::Constant(1, 1.0)};
        cfg.model.safe_lo = Vector::Constant(1, p.safe_lo);
        cfg.model.safe_hi = Vector::Constant(1, p.safe_hi);
    } else {
        for (const char* key : {"state_matrix", "control_matrix", "offset", "disturbance_matrix"}) {
            if (!model.has(key)) model.fail(key, "required for preset affine");
        }
        AffineDescriptor d;
        d.state_matrix = model.matrix("state_matrix");
        n = static_cast<std::size_t>(d.state_matrix.rows());
        if (d.state_matrix.cols() != d.state_matrix.rows()) model.fail("state_matrix", "must be square");
        d.control_matrix = model.matrix("control_matrix");
        if (static_cast<std::size_t>(d.control_matrix.rows()) != n) model.fail("control_matrix", "needs one row per state");
        d.offset = model.sized("offset", n);
        d.disturbance_matrix = model.matrix("disturbance_matrix");
        if (static_cast<std::size_t>(d.disturbance_matrix.rows()) != n) model.fail("disturbance_matrix", "needs one row per state");
        l = static_cast<std::size_t>(d.disturbance_matrix.cols());
        cfg.model.affine = d;
        for (const char* key : {"safe_lo", "safe_hi"}) {
            if (!model.has(key)) model.fail(key, "required for preset affine");
        }
    }
    if (model.has("safe_lo")) cfg.model.safe_lo = model.sized("safe_lo", n);
    if (model.has("safe_hi")) cfg.model.safe_hi = model.sized("safe_hi", n);
    if ((cfg.model.safe_lo.array() >= cfg.model.safe_hi.array()).any()) model.fail("safe_lo", "must be below safe_hi");
    if (tcl) {
        cfg.model.tcl.safe_lo = cfg.model.safe_lo[0];
        cfg.model.tcl.safe_hi = cfg.model.safe_hi[0];
    }
    cfg.model.horizon = model.integer("horizon", 18);
    cfg.model.tcl.horizon = cfg.model.horizon;
    if (model.has("controls") && model.has("control_levels")) model.fail("controls", "give either controls or control_levels");
    const std::size_t m = tcl ? 1 : static_cast<std::size_t>(cfg.model.affine->control_matrix.cols());
    if (model.has("controls")) {
        const Matrix c = model.matrix("controls");
        if (static_cast<std::size_t>(c.cols()) != m) model.fail("controls", "each control needs " + std::to_string(m) + " components");
        cfg.model.controls.clear();
        for (Eigen::Index i = 0; i < c.rows(); ++i) cfg.model.controls.push_back(c.row(i).transpose());
    } else if (model.has("control_levels")) {
        const auto v = model.list("control_levels");
        if (m != 1 || v.size() != 3 || !(v[2] >= 1) || v[2] != std::floor(v[2])) {
            model.fail("control_levels", "expected 'lo, hi, count' for a scalar control");
        }
        const auto count = static_cast<std::size_t>(v[2]);
        cfg.model.controls.clear();
        for (std::size_t k = 0; k < count; ++k) {
            const double u = count == 1 ? v[0] : v[0] + (v[1] - v[0]) * static_cast<double>(k) / static_cast<double>(count - 1);
            cfg.model.controls.push_back(Vector::Constant(1, u));
        }
    } else if (!tcl) {
        model.fail("controls", "required for preset affine");
    }
    model.check_unused();

    Section grid(raw, "grid");
    if (tcl) {
        cfg.grid.lo = Vector::Constant(1, 18.0);
        cfg.grid.hi = Vector::Constant(1, 23.0);
        cfg.grid.nodes = {601};
    } else {
        for (const char* key : {"lo", "hi", "nodes"}) {
            if (!grid.has(key)) grid.fail(key, "required for preset affine");
        }
    }
    if (grid.has("lo")) cfg.grid.lo = grid.sized("lo", n);
    if (grid.has("hi")) cfg.grid.hi = grid.sized("hi", n);
    if (grid.has("nodes")) {
        const Vector v = grid.sized("nodes", n);
        cfg.grid.nodes.clear();
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (!(v[i] >= 2) || v[i] != std::floor(v[i])) grid.fail("nodes", "node counts must be integers >= 2");
            cfg.grid.nodes.push_back(static_cast<std::size_t>(v[i]));
        }
    }
    grid.check_unused();

    Section amb(raw, "ambiguity");
    AmbiguityConfig& a = cfg.ambiguity;
    a.mean = Vector::Zero(static_cast<Eigen::Index>(l));
    a.mean_tol = Vector::Constant(static_cast<Eigen::Index>(l), tcl ? 0.1 : 0.0);
    a.second_moment = Matrix::Identity(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(l)) * TclDisturbance{}.variance;
    if (!tcl && !amb.has("variance")) amb.fail("variance", "required for preset affine");
    read_ambiguity(amb, a, l);
    check_ambiguity(amb, a);
    amb.check_unused();

    for (const auto& [name, entries] : raw.sections) {
        if (name.rfind("ambiguity.", 0) != 0) continue;
        Section stage(raw, name);
        const std::string suffix = name.substr(10);
        std::uint64_t t = 0;
        const auto [p, ec] = std::from_chars(suffix.data(), suffix.data() + suffix.size(), t);
        if (ec != std::errc() || p != suffix.data() + suffix.size() || t >= cfg.model.horizon) {
            throw ConfigurationError(raw.source + ": [" + name + "] stage must be an integer in [0, horizon)");
        }
        if (cfg.stage_ambiguity.empty()) cfg.stage_ambiguity.assign(cfg.model.horizon, a);
        AmbiguityConfig& sa = cfg.stage_ambiguity[t];
        read_ambiguity(stage, sa, l);
        check_ambiguity(stage, sa);
        stage.check_unused();
    }

    Section nominal(raw, "nominal");
    cfg.nominal.kind = "truncated_normal";
    read_distribution(nominal, "", cfg.nominal, a);
    nominal.check_unused();

    Section policy(raw, "policy");
    cfg.policy.alpha = policy.number("alpha", cfg.policy.alpha);
    if (!(cfg.policy.alpha > 0 && cfg.policy.alpha <= 1)) policy.fail("alpha", "must lie in (0, 1]");
    cfg.policy.fallback = policy.integer("fallback", 0);
    if (cfg.policy.fallback >= cfg.model.controls.size()) policy.fail("fallback", "control index out of range");
    policy.check_unused();

    Section sweep(raw, "sweep");
    if (sweep.has("b")) cfg.sweep.b = sweep.list("b");
    if (sweep.has("c")) cfg.sweep.c = sweep.list("c");
    if (cfg.sweep.b.empty() || cfg.sweep.c.empty()) sweep.fail("b", "sweep lists must be nonempty");
    for (double b : cfg.sweep.b) if (b < 0) sweep.fail("b", "values must be nonnegative");
    for (double c : cfg.sweep.c) if (c < 1) sweep.fail("c", "values must be at least 1");
    sweep.check_unused();

    Section sim(raw, "simulate");
    cfg.simulate.truth.kind = "uniform";
    read_distribution(sim, "truth_", cfg.simulate.truth, a);
    cfg.simulate.x0 = sim.has("x0") ? sim.sized("x0", n)
                                    : (tcl ? Vector::Constant(1, 21.0) : Vector(0.5 * (cfg.model.safe_lo + cfg.model.safe_hi)));
    cfg.simulate.samples = sim.integer("samples", cfg.simulate.samples);
    if (cfg.simulate.samples == 0) sim.fail("samples", "must be at least 1");
    cfg.simulate.seed = sim.integer("seed", cfg.simulate.seed);
    sim.check_unused();

    Section audit(raw, "audit");
    cfg.audit.samples = audit.integer("samples", cfg.audit.samples);
    cfg.audit.seed = audit.integer("seed", cfg.audit.seed);
    audit.check_unused();

    Section run(raw, "run");
    if (run.has("mode")) {
        try {
            cfg.mode = parse_mode(run.text("mode"));
        } catch (const ConfigurationError& e) {
            run.fail("mode", e.what());
        }
    }
    cfg.threads = run.integer("threads", 1);
    if (cfg.threads == 0) run.fail("threads", "must be at least 1");
    run.check_unused();

    // Surface model/grid inconsistencies now rather than mid-run.
    try {
        const Model mdl = build_model(cfg);
        const auto g = build_grid(cfg, mdl);
        g->check_envelope(mdl, build_supports(cfg));
    } catch (const ConfigurationError& e) {
        throw ConfigurationError(raw.source + ": [grid] " + e.what());
    }
    return cfg;
}

RunConfig load(const std::string& path) { return validate(parse_file(path)); }

namespace {

void emit_ambiguity(std::vector<std::string>& out, const std::string& p, const AmbiguityConfig& a) {
    out.push_back(p + ".support_lo=" + fmt(a.support_lo));
    out.push_back(p + ".support_hi=" + fmt(a.support_hi));
    out.push_back(p + ".mean=" + fmt(a.mean));
    out.push_back(p + ".mean_tol=" + fmt(a.mean_tol));
    out.push_back(p + ".variance=" + fmt(a.second_moment));
    out.push_back(p + ".scale=" + fmt(a.scale));
}

void emit_model_grid(std::vector<std::string>& out, const RunConfig& c) {
    out.push_back("model.preset=" + c.model.preset);
    if (c.model.preset == "tcl") {
        const auto& p = c.model.tcl;
        out.push_back("model.tcl=" + fmt(p.resistance) + "," + fmt(p.capacitance) + "," + fmt(p.ambient) + "," +
                      fmt(p.step_hours) + "," + fmt(p.power) + "," + fmt(p.efficiency));
    } else {
        const auto& d = *c.model.affine;
        out.push_back("model.state_matrix=" + fmt(d.state_matrix));
        out.push_back("model.control_matrix=" + fmt(d.control_matrix));
        out.push_back("model.offset=" + fmt(d.offset));
        out.push_back("model.disturbance_matrix=" + fmt(d.disturbance_matrix));
    }
    std::string controls;
    for (std::size_t i = 0; i < c.model.controls.size(); ++i) controls += (i ? ";" : "") + fmt(c.model.controls[i]);
    out.push_back("model.controls=" + controls);
    out.push_back("model.safe_lo=" + fmt(c.model.safe_lo));
    out.push_back("model.safe_hi=" + fmt(c.model.safe_hi));
    out.push_back("model.horizon=" + std::to_string(c.model.horizon));
    out.push_back("grid.lo=" + fmt(c.grid.lo));
    out.push_back("grid.hi=" + fmt(c.grid.hi));
    out.push_back("grid.nodes=" + fmt_list(c.grid.nodes));
}

void emit_distribution(std::vector<std::string>& out, const std::string& p, const DistributionConfig& d) {
    out.push_back(p + "kind=" + d.kind);
    out.push_back(p + "mean=" + fmt(d.mean));
    out.push_back(p + "stddev=" + fmt(d.stddev));
}

std::string join_sorted(std::vector<std::string> lines) {
    std::sort(lines.begin(), lines.end());
    std::string s;
    for (const auto& l : lines) s += l + "\n";
    return s;
}

} // namespace

std::string canonical_solve(const RunConfig& cfg, Mode mode) {
    std::vector<std::string> out;
    out.push_back("format=drsafe-values-1");
    emit_model_grid(out, cfg);
    out.push_back("mode=" + to_string(mode));
    if (mode == Mode::Nominal) {
        emit_distribution(out, "nominal.", cfg.nominal);
        out.push_back("nominal.support_lo=" + fmt(cfg.ambiguity.support_lo));
        out.push_back("nominal.support_hi=" + fmt(cfg.ambiguity.support_hi));
    } else {
        emit_ambiguity(out, "ambiguity", cfg.ambiguity);
        for (std::size_t t = 0; t < cfg.stage_ambiguity.size(); ++t) {
            emit_ambiguity(out, "ambiguity." + std::to_string(t), cfg.stage_ambiguity[t]);
        }
    }
    return join_sorted(std::move(out));
}

std::string canonical(const RunConfig& cfg) {
    std::vector<std::string> out;
    emit_model_grid(out, cfg);
    emit_ambiguity(out, "ambiguity", cfg.ambiguity);
    for (std::size_t t = 0; t < cfg.stage_ambiguity.size(); ++t) {
        emit_ambiguity(out, "ambiguity." + std::to_string(t), cfg.stage_ambiguity[t]);
    }
    emit_distribution(out, "nominal.", cfg.nominal);
    out.push_back("policy.alpha=" + fmt(cfg.policy.alpha));
    out.push_back("policy.fallback=" + std::to_string(cfg.policy.fallback));
    out.push_back("sweep.b=" + fmt_list(cfg.sweep.b));
    out.push_back("sweep.c=" + fmt_list(cfg.sweep.c));
    emit_distribution(out, "simulate.truth_", cfg.simulate.truth);
    out.push_back("simulate.x0=" + fmt(cfg.simulate.x0));
    out.push_back("simulate.samples=" + std::to_string(cfg.simulate.samples));
    out.push_back("simulate.seed=" + std::to_string(cfg.simulate.seed));
    out.push_back("audit.samples=" + std::to_string(cfg.audit.samples));
    out.push_back("audit.seed=" + std::to_string(cfg.audit.seed));
    out.push_back("run.mode=" + to_string(cfg.mode));
    return join_sorted(std::move(out));
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

Model build_model(const RunConfig& cfg) {
    if (cfg.model.preset == "tcl") {
        Model m = tcl_model(cfg.model.tcl);
        m.horizon = cfg.model.horizon;
        m.controls = ControlSet(cfg.model.controls);
        return m;
    }
    return Model{Dynamics::affine(*cfg.model.affine), Box(cfg.model.safe_lo, cfg.model.safe_hi),
                 ControlSet(cfg.model.controls), cfg.model.horizon};
}

std::shared_ptr<const StateGrid> build_grid(const RunConfig& cfg, const Model& model) {
    return std::make_shared<const StateGrid>(cfg.grid.lo, cfg.grid.hi, cfg.grid.nodes, model.safe_region);
}

MomentAmbiguitySet build_ambiguity(const AmbiguityConfig& a) {
    return MomentAmbiguitySet(MomentSpec{Box(a.support_lo, a.support_hi), a.mean, a.mean_tol, a.second_moment, a.scale});
}

NominalDistribution build_distribution(const DistributionConfig& d, const AmbiguityConfig& a) {
    const Box support(a.support_lo, a.support_hi);
    if (d.kind == "uniform") return NominalDistribution::uniform(support);
    return NominalDistribution::truncated_normal(d.mean, d.stddev, support);
}

std::vector<StageUncertainty> build_schedule(const RunConfig& cfg, Mode mode) {
    std::vector<StageUncertainty> out;
    if (mode == Mode::Nominal) {
        out.emplace_back(build_distribution(cfg.nominal, cfg.ambiguity));
        return out;
    }
    if (cfg.stage_ambiguity.empty()) {
        out.emplace_back(build_ambiguity(cfg.ambiguity));
    } else {
        for (const auto& a : cfg.stage_ambiguity) out.emplace_back(build_ambiguity(a));
    }
    return out;
}

std::vector<Box> build_supports(const RunConfig& cfg) {
    std::vector<Box> out;
    if (cfg.stage_ambiguity.empty()) {
        out.emplace_back(cfg.ambiguity.support_lo, cfg.ambiguity.support_hi);
    } else {
        for (const auto& a : cfg.stage_ambiguity) out.emplace_back(a.support_lo, a.support_hi);
    }
    return out;
}

} // namespace drsafe::config
