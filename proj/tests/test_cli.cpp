#include <doctest.h>

#include "drsafe/commands.hpp"
#include "drsafe/io.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace drsafe;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("drsafe_cli_" + std::to_string(::getpid()) + "_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

int drsafe_run(std::vector<std::string> args, std::string* log = nullptr) {
    args.insert(args.begin(), "drsafe");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    const int rc = cli::run(static_cast<int>(argv.size()), argv.data(), out);
    if (log) *log = out.str();
    return rc;
}

std::vector<std::vector<std::string>> rows(const fs::path& p) {
    std::vector<std::vector<std::string>> out;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream s(line);
        std::string c;
        while (std::getline(s, c, ',')) cells.push_back(c);
        out.push_back(cells);
    }
    return out;
}

const char* kSmall = "[model]\nhorizon = 4\n[simulate]\nsamples = 500\n[audit]\nsamples = 6\n";

} // namespace

TEST_CASE("horizon 0 writes one file equal to the indicator of A") {
    const fs::path d = scratch("h0");
    write(d / "h0.cfg", "[model]\nhorizon = 0\n");
    REQUIRE(drsafe_run({"solve", "--config", (d / "h0.cfg").string(), "--out", (d / "out").string()}) == 0);
    CHECK(fs::exists(d / "out" / "v_000.csv"));
    CHECK_FALSE(fs::exists(d / "out" / "v_001.csv"));
    CHECK_FALSE(fs::exists(d / "out" / "phi_000.csv"));
    const auto r = rows(d / "out" / "v_000.csv");
    REQUIRE(r.size() == 602);
    CHECK(r[0] == std::vector<std::string>{"x", "v"});
    for (std::size_t k = 1; k < r.size(); ++k) {
        const double x = std::stod(r[k][0]);
        CHECK(std::stod(r[k][1]) == ((x >= 19.0 && x <= 22.0) ? 1.0 : 0.0));
    }
    fs::remove_all(d);
}

TEST_CASE("solve is idempotent through the cache") {
    const fs::path d = scratch("cache");
    write(d / "s.cfg", kSmall);
    std::string log;
    const std::vector<std::string> args = {"solve", "--config", (d / "s.cfg").string(), "--out", (d / "out").string()};
    REQUIRE(drsafe_run(args, &log) == 0);
    CHECK(log.find("computed") != std::string::npos);
    const std::string v0 = slurp(d / "out" / "v_000.csv");
    const std::string phi = slurp(d / "out" / "phi_003.csv");
    REQUIRE(drsafe_run(args, &log) == 0);
    CHECK(log.find("cache hit") != std::string::npos);
    CHECK(log.find("computed") == std::string::npos);
    CHECK(slurp(d / "out" / "v_000.csv") == v0);
    CHECK(slurp(d / "out" / "phi_003.csv") == phi);
    for (const auto& e : fs::directory_iterator(d / "out")) {
        CHECK(e.path().string().find(".tmp") == std::string::npos);
    }
    fs::remove_all(d);
}

TEST_CASE("DRSAFE_CACHE_DIR relocates the cache") {
    const fs::path d = scratch("env");
    write(d / "s.cfg", kSmall);
    ::setenv("DRSAFE_CACHE_DIR", (d / "elsewhere").string().c_str(), 1);
    const int rc = drsafe_run({"solve", "--config", (d / "s.cfg").string(), "--out", (d / "out").string()});
    ::unsetenv("DRSAFE_CACHE_DIR");
    REQUIRE(rc == 0);
    CHECK_FALSE(fs::exists(d / "out" / ".cache"));
    REQUIRE(fs::exists(d / "elsewhere"));
    CHECK(std::distance(fs::directory_iterator(d / "elsewhere"), fs::directory_iterator()) == 1);
    fs::remove_all(d);
}

TEST_CASE("a singleton sweep reproduces the solve output") {
    const fs::path d = scratch("sweep");
    write(d / "s.cfg", std::string(kSmall) + "[sweep]\nb = 0.1\nc = 1\n");
    REQUIRE(drsafe_run({"solve", "--config", (d / "s.cfg").string(), "--out", (d / "a").string()}) == 0);
    REQUIRE(drsafe_run({"sweep", "--config", (d / "s.cfg").string(), "--out", (d / "b").string()}) == 0);
    const auto v = rows(d / "a" / "v_000.csv");
    const auto s = rows(d / "b" / "sweep.csv");
    REQUIRE(s.size() == v.size());
    CHECK(s[0] == std::vector<std::string>{"b", "c", "x", "v0"});
    for (std::size_t k = 1; k < v.size(); ++k) {
        CHECK(s[k][2] == v[k][0]);
        CHECK(s[k][3] == v[k][1]);
    }
    fs::remove_all(d);
}

TEST_CASE("sweep records failing pairs and continues") {
    const fs::path d = scratch("sweepfail");
    // with b = 0.1 no distribution on [0.2, 0.6] has mean within 0.1 of 0
    write(d / "s.cfg", std::string(kSmall) +
                           "[ambiguity]\nsupport_lo = 0.2\nsupport_hi = 0.6\nmean = 0\nmean_tol = 0.25\n"
                           "variance = 0.5\n[sweep]\nb = 0.25, 0.1\nc = 1\n[grid]\nlo = 18\nhi = 24\nnodes = 721\n");
    std::string log;
    REQUIRE(drsafe_run({"sweep", "--config", (d / "s.cfg").string(), "--out", (d / "out").string()}, &log) == 0);
    const auto st = rows(d / "out" / "sweep_status.csv");
    REQUIRE(st.size() == 3);
    CHECK(st[1][2] == "ok");
    CHECK(st[2][2] == "failed");
    CHECK(log.find("failed") != std::string::npos);
    fs::remove_all(d);
}

TEST_CASE("audit instances with a constant payoff have no gap") {
    const auto amb = scalar_ambiguity(-0.4, 0.4, 0.0, 0.1, 0.05, 1.0);
    const cli::AuditRow r = cli::audit_instance(sip::Payoff::piecewise_linear({sip::Segment{-0.4, 0.4, 0.0, 1.0}}), amb);
    CHECK(std::abs(r.gap) <= 1e-9);
    CHECK(std::abs(r.dual - 1.0) <= 1e-9);
    CHECK(r.weak_violations == 0);
    CHECK(r.converged);
}

TEST_CASE("audit report") {
    const fs::path d = scratch("audit");
    write(d / "s.cfg", kSmall);
    REQUIRE(drsafe_run({"audit", "--config", (d / "s.cfg").string(), "--out", (d / "out").string()}) == 0);
    const auto r = rows(d / "out" / "audit.csv");
    REQUIRE(r.size() == 7);
    CHECK(r[0][7] == "primal_4096");
    CHECK(r[0][8] == "gap");
    for (std::size_t k = 1; k < r.size(); ++k) {
        CHECK(std::abs(std::stod(r[k][8])) <= 1e-4);
        CHECK(r[k][9] == "0");
        CHECK(r[k].back() == "ok");
    }
    fs::remove_all(d);
}

TEST_CASE("compare mode simulates both controllers reproducibly") {
    const fs::path d = scratch("sim");
    write(d / "s.cfg", kSmall);
    const std::vector<std::string> args = {"simulate",         "--config", (d / "s.cfg").string(), "--out",
                                           (d / "out").string(), "--mode", "compare", "--trajectories"};
    REQUIRE(drsafe_run(args) == 0);
    const auto rep = rows(d / "out" / "report.csv");
    REQUIRE(rep.size() == 3);
    CHECK(rep[1][0] == "robust");
    CHECK(rep[2][0] == "nominal");
    CHECK(rep[1][1] == "500");
    const std::string first = slurp(d / "out" / "report.csv");
    const std::string quant = slurp(d / "out" / "quantiles.csv");
    const auto traj = rows(d / "out" / "trajectories_robust.csv");
    CHECK(traj[0] == std::vector<std::string>{"sample", "t", "x", "u", "branch"});
    CHECK(traj.size() == 1 + 500 * 5);
    CHECK((traj[1][4] == "safe" || traj[1][4] == "fallback"));
    REQUIRE(drsafe_run(args) == 0);
    CHECK(slurp(d / "out" / "report.csv") == first);
    CHECK(slurp(d / "out" / "quantiles.csv") == quant);
    REQUIRE(drsafe_run({"simulate", "--config", (d / "s.cfg").string(), "--out", (d / "out").string(), "--seed", "5"}) == 0);
    CHECK(rows(d / "out" / "report.csv")[1][4] == "5");
    fs::remove_all(d);
}

TEST_CASE("safeset export") {
    const fs::path d = scratch("safeset");
    write(d / "s.cfg", kSmall);
    REQUIRE(drsafe_run({"safeset", "--config", (d / "s.cfg").string(), "--out", (d / "out").string(), "--alpha", "0.9",
                        "--mode", "compare"}) == 0);
    const auto s = rows(d / "out" / "robust" / "safeset.csv");
    const auto c = rows(d / "out" / "nominal" / "controller.csv");
    CHECK(s.size() == 1 + 5 * 601);
    CHECK(c.size() == 1 + 4 * 601);
    CHECK(s[0] == std::vector<std::string>{"t", "node", "x", "member"});
    CHECK(c[0] == std::vector<std::string>{"t", "node", "x", "branch", "u"});
    fs::remove_all(d);
}

TEST_CASE("exit codes") {
    const fs::path d = scratch("codes");
    write(d / "bad.cfg", "[model]\nhorizon = x\n");
    std::string log;
    CHECK(drsafe_run({"solve", "--config", (d / "bad.cfg").string(), "--out", (d / "out").string()}, &log) == 2);
    CHECK(log.find("bad.cfg:2: [model] horizon") != std::string::npos);
    CHECK(drsafe_run({"solve", "--config", (d / "missing.cfg").string()}) == 2);
    CHECK(drsafe_run({"solve", "--alpha", "1.5", "--out", (d / "out").string()}) == 2);
    CHECK(drsafe_run({"solve", "--mode", "sideways", "--out", (d / "out").string()}) == 2);
    CHECK(drsafe_run({"solve", "--frobnicate"}) == 2);
    CHECK(drsafe_run({}) == 2);
    fs::remove_all(d);
}
