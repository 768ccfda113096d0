#include <doctest.h>

#include "drsafe/config.hpp"
#include "drsafe/errors.hpp"

#include <cmath>

using namespace drsafe;
using namespace drsafe::config;

namespace {

RunConfig from(const std::string& text) { return validate(parse(text, "t.cfg")); }

std::string error_of(const std::string& text) {
    try {
        from(text);
    } catch (const ConfigurationError& e) {
        return e.what();
    }
    return "";
}

bool mentions(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

} // namespace

TEST_CASE("an empty config is the TCL benchmark") {
    const RunConfig c = from("");
    CHECK(c.model.preset == "tcl");
    CHECK(c.model.horizon == 18);
    CHECK(c.model.controls.size() == 2);
    CHECK(c.model.safe_lo[0] == 19.0);
    CHECK(c.model.safe_hi[0] == 22.0);
    CHECK(c.grid.nodes == std::vector<std::size_t>{601});
    CHECK(c.ambiguity.support_hi[0] == doctest::Approx(std::sqrt(3 * 0.0625)));
    CHECK(c.ambiguity.support_lo[0] == doctest::Approx(-std::sqrt(3 * 0.0625)));
    CHECK(c.ambiguity.mean_tol[0] == 0.1);
    CHECK(c.ambiguity.scale == 1.0);
    CHECK(c.ambiguity.second_moment(0, 0) == 0.0625);
    CHECK(c.nominal.kind == "truncated_normal");
    CHECK(c.nominal.stddev[0] == doctest::Approx(std::sqrt(0.0625 / 2)));
    CHECK(c.simulate.truth.kind == "uniform");
    CHECK(c.simulate.x0[0] == 21.0);
    CHECK(c.simulate.samples == 10000);
    CHECK(c.policy.alpha == 0.95);
    CHECK(c.mode == Mode::Robust);
    CHECK(c.stage_ambiguity.empty());
}

TEST_CASE("literal support and explicit boxes") {
    CHECK(from("[ambiguity]\nsupport = literal\n").ambiguity.support_hi[0] ==
          doctest::Approx(0.5 * std::sqrt(0.0625 / 12)));
    const RunConfig c = from("[ambiguity]\nsupport_lo = -0.3\nsupport_hi = 0.4\nmean_tol = 0.05\nscale = 2\n");
    CHECK(c.ambiguity.support_lo[0] == -0.3);
    CHECK(c.ambiguity.support_hi[0] == 0.4);
    CHECK(c.ambiguity.scale == 2.0);
    CHECK(mentions(error_of("[ambiguity]\nsupport_lo = -0.3\n"), "support_hi go together"));
    CHECK(mentions(error_of("[ambiguity]\nsupport = wide\n"), "uniform or literal"));
}

TEST_CASE("syntax errors name the line") {
    CHECK(mentions(error_of("horizon = 3\n"), "t.cfg:1: key outside of any section"));
    CHECK(mentions(error_of("[model]\n\n[bogus]\n"), "t.cfg:3: unknown section [bogus]"));
    CHECK(mentions(error_of("[model]\nhorizon = 3\n# note\nhorizon = 4\n"), "t.cfg:4: duplicate key 'horizon' (first on line 2)"));
    CHECK(mentions(error_of("[model\n"), "t.cfg:1: unterminated section header"));
    CHECK(mentions(error_of("[model]\njust words\n"), "t.cfg:2: expected key = value"));
    CHECK(mentions(error_of("[grid]\nnodes =\n"), "t.cfg:2: empty value"));
    CHECK(mentions(error_of("[grid]\n[grid]\n"), "duplicate section"));
}

TEST_CASE("validation errors name the line, section and key") {
    CHECK(mentions(error_of("[model]\nhorizon = 3\ncolour = red\n"), "t.cfg:3: [model] unknown key 'colour'"));
    CHECK(mentions(error_of("[policy]\n\nalpha = 1.5\n"), "t.cfg:3: [policy] alpha: must lie in (0, 1]"));
    CHECK(mentions(error_of("[model]\nhorizon = -2\n"), "t.cfg:2: [model] horizon: expected a nonnegative integer"));
    CHECK(mentions(error_of("[simulate]\nx0 = 21abc\n"), "[simulate] x0: expected a number, got '21abc'"));
    CHECK(mentions(error_of("[run]\nmode = fancy\n"), "[run] mode"));
    CHECK(mentions(error_of("[policy]\nfallback = 2\n"), "control index out of range"));
    CHECK(mentions(error_of("[sweep]\nc = 0.5\n"), "at least 1"));
    CHECK(mentions(error_of("[grid]\nnodes = 600\n"), "[grid]"));
    // mean far outside the support leaves no distribution
    CHECK(mentions(error_of("[ambiguity]\nsupport_lo = -0.4\nsupport_hi = 0.4\nmean = 3\nmean_tol = 0\n"), "ambiguity set is empty"));
}

TEST_CASE("comments, blank lines and spacing do not matter") {
    const RunConfig a = from("[model]\nhorizon=5\n[ambiguity]\nmean_tol=0.05\n");
    const RunConfig b = from("# header\n[ambiguity]   # trailing\n  mean_tol =   0.05 \n\n[model]\n horizon = 5\n");
    CHECK(canonical(a) == canonical(b));
    CHECK(fnv1a(canonical(a)) == fnv1a(canonical(b)));
}

TEST_CASE("solve hash covers exactly the value-function settings") {
    const RunConfig base = from("");
    const std::string key = canonical_solve(base, Mode::Robust);
    CHECK(canonical_solve(from("[simulate]\nseed = 99\nsamples = 5\n"), Mode::Robust) == key);
    CHECK(canonical_solve(from("[policy]\nalpha = 0.5\n"), Mode::Robust) == key);
    CHECK(canonical_solve(from("[ambiguity]\nmean_tol = 0.05\n"), Mode::Robust) != key);
    CHECK(canonical_solve(from("[model]\nhorizon = 4\n"), Mode::Robust) != key);
    CHECK(canonical_solve(base, Mode::Nominal) != key);
    CHECK(canonical_solve(from("[nominal]\nstddev = 0.1\n"), Mode::Nominal) != canonical_solve(base, Mode::Nominal));
    CHECK(canonical_solve(from("[nominal]\nstddev = 0.1\n"), Mode::Robust) == key);
    CHECK(canonical(from("[simulate]\nseed = 99\n")) != canonical(base));
}

TEST_CASE("FNV-1a reference values") {
    CHECK(hex(fnv1a("")) == "cbf29ce484222325");
    CHECK(hex(fnv1a("a")) == "af63dc4c8601ec8c");
    CHECK(hex(fnv1a("foobar")) == "85944171f73967e8");
}

TEST_CASE("per-stage ambiguity overrides") {
    const RunConfig c = from("[model]\nhorizon = 4\n[ambiguity.2]\nmean_tol = 0.2\nscale = 3\n");
    REQUIRE(c.stage_ambiguity.size() == 4);
    CHECK(c.stage_ambiguity[1].mean_tol[0] == 0.1);
    CHECK(c.stage_ambiguity[2].mean_tol[0] == 0.2);
    CHECK(c.stage_ambiguity[2].scale == 3.0);
    CHECK(build_schedule(c, Mode::Robust).size() == 4);
    CHECK(build_supports(c).size() == 4);
    CHECK(build_schedule(c, Mode::Nominal).size() == 1);
    CHECK(mentions(error_of("[model]\nhorizon = 4\n[ambiguity.4]\nscale = 2\n"), "[ambiguity.4] stage"));
    CHECK(mentions(error_of("[ambiguity.x]\nscale = 2\n"), "[ambiguity.x] stage"));
    CHECK(mentions(error_of("[policy.1]\nalpha = 0.5\n"), "only [ambiguity.<stage>]"));
}

TEST_CASE("control lists and levels") {
    const RunConfig c = from("[model]\ncontrol_levels = 0, 1, 5\n");
    REQUIRE(c.model.controls.size() == 5);
    CHECK(c.model.controls[2][0] == 0.5);
    CHECK(from("[model]\ncontrols = 0; 0.5; 1\n").model.controls.size() == 3);
    CHECK(mentions(error_of("[model]\ncontrols = 0, 1\n"), "each control needs 1 components"));
    CHECK(mentions(error_of("[model]\ncontrols = 0\ncontrol_levels = 0, 1, 3\n"), "either controls or control_levels"));
}

TEST_CASE("affine preset") {
    const std::string text =
        "[model]\npreset = affine\nstate_matrix = 0.9\ncontrol_matrix = 1\noffset = 0.05\n"
        "disturbance_matrix = 1\nsafe_lo = -1\nsafe_hi = 1\ncontrol_levels = -0.2, 0.2, 21\nhorizon = 6\n"
        "[grid]\nlo = -1.5\nhi = 1.5\nnodes = 301\n"
        "[ambiguity]\nsupport_lo = -0.25\nsupport_hi = 0.25\nmean_tol = 0.03\nvariance = 0.01\nscale = 1.5\n";
    const RunConfig c = from(text);
    const Model m = build_model(c);
    CHECK(m.horizon == 6);
    CHECK(m.controls.size() == 21);
    CHECK(m.dynamics.step(Vector::Constant(1, 0.5), Vector::Constant(1, 0.1), Vector::Constant(1, 0.02))[0] ==
          doctest::Approx(0.9 * 0.5 + 0.1 + 0.05 + 0.02));
    CHECK(build_grid(c, m)->size() == 301);
    CHECK(c.simulate.x0[0] == 0.0);

    CHECK(mentions(error_of("[model]\npreset = affine\n"), "state_matrix: required for preset affine"));
    CHECK(mentions(error_of("[model]\npreset = spline\n"), "expected tcl or affine"));
}

TEST_CASE("two-dimensional variance forms") {
    const std::string model =
        "[model]\npreset = affine\nstate_matrix = 0.9, 0; 0, 0.9\ncontrol_matrix = 1; 0\noffset = 0\n"
        "disturbance_matrix = 1, 0; 0, 1\nsafe_lo = -1\nsafe_hi = 1\ncontrols = 0; 0.1\nhorizon = 2\n"
        "[grid]\nlo = -2\nhi = 2\nnodes = 41\n[ambiguity]\nsupport_lo = -0.3\nsupport_hi = 0.3\n";
    CHECK(from(model + "variance = 0.01\n").ambiguity.second_moment.isApprox(Matrix::Identity(2, 2) * 0.01));
    CHECK(from(model + "variance = 0.01, 0.02\n").ambiguity.second_moment(1, 1) == 0.02);
    CHECK(from(model + "variance = 0.01, 0.001; 0.001, 0.02\n").ambiguity.second_moment(0, 1) == 0.001);
    CHECK(mentions(error_of(model + "variance = 1, 2, 3\n"), "variance"));
    CHECK(from(model + "variance = 0.01\n").grid.nodes == std::vector<std::size_t>{41, 41});
}
