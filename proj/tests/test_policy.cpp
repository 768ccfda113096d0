#include <doctest.h>

#include "drsafe/errors.hpp"
#include "drsafe/policy.hpp"
#include "drsafe/simulate.hpp"

#include "tcl_fixture.hpp"

#include <cmath>

using namespace drsafe;
using testing_support::tcl_ambiguity;
using testing_support::tcl_grid;
using testing_support::tcl_support;

namespace {

struct Fixture {
    std::shared_ptr<const Model> model;
    RecursionResult result;
};

const Fixture& tcl() {
    static const Fixture f = [] {
        auto model = std::make_shared<const Model>(tcl_preset());
        BellmanOptions opt;
        opt.threads = 4;
        RecursionResult r = solve_recursion(*model, {tcl_ambiguity()}, tcl_grid(*model), opt);
        return Fixture{model, std::move(r)};
    }();
    return f;
}

SafetyOrientedController tcl_controller(double alpha) {
    const Fixture& f = tcl();
    return SafetyOrientedController(f.model, threshold(f.result.values, alpha), f.result.policies,
                                    FallbackPolicy::constant(0), {tcl_support()});
}

std::size_t count(const std::vector<std::uint8_t>& mask) {
    std::size_t n = 0;
    for (auto m : mask) n += m;
    return n;
}

} // namespace

TEST_CASE("threshold validates alpha") {
    const auto& values = tcl().result.values;
    CHECK_THROWS_AS(threshold(values, 1.0 + 1e-12), ConfigurationError);
    CHECK_THROWS_AS(threshold(values, 0.0), ConfigurationError);
    CHECK_THROWS_AS(threshold(values, -0.5), ConfigurationError);
    CHECK_NOTHROW(threshold(values, 1.0));
}

TEST_CASE("threshold extremes") {
    const auto& values = tcl().result.values;
    const SafeSetFamily one = threshold(values, 1.0);
    for (std::size_t t = 0; t < values.size(); ++t) {
        for (std::size_t k = 0; k < values[t].values().size(); ++k) {
            CHECK(one.node_member(t, k) == (values[t].node_value(k) == 1.0));
        }
    }
    const SafeSetFamily tiny = threshold(values, 1e-300);
    CHECK(count(tiny.mask(18)) == 361);
    CHECK(count(one.mask(18)) == 361);
}

TEST_CASE("every member has value at least alpha; sets are nested in time and in alpha") {
    const auto& values = tcl().result.values;
    const SafeSetFamily s95 = threshold(values, 0.95);
    const SafeSetFamily s80 = threshold(values, 0.8);
    for (std::size_t t = 0; t < values.size(); ++t) {
        for (std::size_t k = 0; k < values[t].values().size(); ++k) {
            if (s95.node_member(t, k)) {
                CHECK(values[t].node_value(k) >= 0.95);
                CHECK(s80.node_member(t, k));
            }
            if (t + 1 < values.size() && s95.node_member(t, k)) CHECK(s95.node_member(t + 1, k));
        }
    }
}

TEST_CASE("TCL safe set at 0.95 is at most two intervals strictly inside A") {
    const SafeSetFamily s = threshold(tcl().result.values, 0.95);
    const StateGrid& grid = s.grid();
    const auto& mask = s.mask(0);
    std::size_t runs = 0;
    for (std::size_t k = 0; k < mask.size(); ++k) {
        if (mask[k] && (k == 0 || !mask[k - 1])) ++runs;
        if (mask[k]) {
            CHECK(grid.coordinate(0, k) > 19.0);
            CHECK(grid.coordinate(0, k) < 22.0);
        }
    }
    CHECK(runs >= 1);
    CHECK(runs <= 2);
}

TEST_CASE("conservative off-node membership") {
    const Model model = tcl_preset();
    const auto grid = tcl_grid(model);
    REQUIRE(grid->size() == 601);
    std::vector<std::uint8_t> mask(601, 0);
    for (std::size_t k = 200; k <= 300; ++k) mask[k] = 1;
    const SafeSetFamily s(0.5, grid, {mask});
    const double h = grid->spacing(0);
    CHECK(s.contains(0, grid->node(200)));
    CHECK(s.contains(0, grid->node(300)));
    CHECK_FALSE(s.contains(0, grid->node(199)));
    CHECK(s.contains(0, Vector::Constant(1, grid->coordinate(0, 250) + 0.3 * h)));
    // a cell with one member vertex is not a member
    CHECK_FALSE(s.contains(0, Vector::Constant(1, grid->coordinate(0, 300) + 0.5 * h)));
    CHECK_FALSE(s.contains(0, Vector::Constant(1, grid->coordinate(0, 199) + 0.5 * h)));
    CHECK_FALSE(s.contains(0, Vector::Constant(1, 17.0)));
    CHECK_FALSE(s.contains(0, Vector::Constant(1, 30.0)));
}

TEST_CASE("nearest node ties go to the lower coordinate") {
    const SafetyOrientedController c = tcl_controller(0.95);
    const StateGrid& grid = c.sets().grid();
    const double mid = 0.5 * (grid.coordinate(0, 10) + grid.coordinate(0, 11));
    CHECK(c.nearest_node(Vector::Constant(1, mid)) == 10);
    CHECK(c.nearest_node(Vector::Constant(1, std::nextafter(mid, 100.0))) == 11);
    CHECK(c.nearest_node(Vector::Constant(1, 5.0)) == 0);
    CHECK(c.nearest_node(Vector::Constant(1, 50.0)) == grid.size() - 1);
}

TEST_CASE("all_safe_next trivial cases") {
    const Model base = tcl_preset();
    const auto model = std::make_shared<const Model>(base);
    const auto grid = tcl_grid(base);
    std::vector<std::uint8_t> all(grid->size(), 0), none(grid->size(), 0);
    for (std::size_t k = 0; k < grid->size(); ++k) all[k] = base.safe_region.contains(grid->node(k));
    std::vector<std::vector<std::int32_t>> policy(1, std::vector<std::int32_t>(grid->size(), 1));
    const Box tiny = Box::interval(-1e-3, 1e-3);

    const SafetyOrientedController full(model, SafeSetFamily(0.5, grid, {all, all}), policy,
                                        FallbackPolicy::constant(0), {tiny});
    CHECK(full.all_safe_next(Vector::Constant(1, 20.5), 0));
    CHECK(full.act(Vector::Constant(1, 20.5), 0).branch == Branch::Fallback);
    CHECK(full.act(Vector::Constant(1, 20.5), 0).control == 0);

    const SafetyOrientedController empty(model, SafeSetFamily(0.5, grid, {none, none}), policy,
                                         FallbackPolicy::constant(0), {tiny});
    for (double x : {19.0, 20.5, 22.0}) {
        CHECK_FALSE(empty.all_safe_next(Vector::Constant(1, x), 0));
        const Action a = empty.act(Vector::Constant(1, x), 0);
        CHECK(a.branch == Branch::Safe);
        CHECK(a.control == 1);
    }
}

TEST_CASE("all_safe_next agrees with a brute-force disturbance scan") {
    const SafetyOrientedController c = tcl_controller(0.95);
    const Model& model = c.model();
    const Box w = tcl_support();
    for (std::size_t t : {0u, 5u, 12u}) {
        for (double x = 19.0; x <= 22.0; x += 0.0125) {
            const Vector xv = Vector::Constant(1, x);
            bool brute = true;
            for (std::size_t u = 0; u < 2 && brute; ++u) {
                for (int k = 0; k <= 1000; ++k) {
                    const double wk = w.lo(0) + (w.hi(0) - w.lo(0)) * k / 1000.0;
                    if (!c.sets().contains(t + 1, model.dynamics.step(xv, model.controls[u], Vector::Constant(1, wk)))) {
                        brute = false;
                        break;
                    }
                }
            }
            CHECK(c.all_safe_next(xv, t) == brute);
        }
    }
    CHECK(c.all_safe_next(Vector::Constant(1, 20.5), 0) == c.all_safe_next(Vector::Constant(1, 20.5), 0));
}

TEST_CASE("act follows the safe policy when some successor may leave the next set") {
    const SafetyOrientedController c = tcl_controller(0.95);
    const auto& policy = tcl().result.policies;
    for (double x : {19.05, 19.5, 21.3, 21.95, 18.5, 23.0}) {
        const Vector xv = Vector::Constant(1, x);
        const Action a = c.act(xv, 5);
        CHECK(a.control < 2);
        if (!c.all_safe_next(xv, 5)) {
            CHECK(a.branch == Branch::Safe);
            CHECK(a.control == static_cast<std::size_t>(policy[5][c.nearest_node(xv)]));
        } else {
            CHECK(a.branch == Branch::Fallback);
            CHECK(a.control == 0);
        }
    }
    CHECK_FALSE(c.all_safe_next(Vector::Constant(1, 19.05), 5));
}

TEST_CASE("fallback tables and inadmissible fallbacks") {
    const Fixture& f = tcl();
    const auto grid = f.result.values[0].grid_ptr();
    std::vector<std::vector<std::int32_t>> table(1, std::vector<std::int32_t>(grid->size(), 1));
    const SafetyOrientedController on(f.model, threshold(f.result.values, 0.5), f.result.policies,
                                      FallbackPolicy::table(table), {Box::interval(-1e-3, 1e-3)});
    const Action a = on.act(Vector::Constant(1, 20.5), 0);
    CHECK(a.branch == Branch::Fallback);
    CHECK(a.control == 1);

    Model restricted = tcl_preset();
    restricted.controls = ControlSet(restricted.controls.controls(),
                                     [](const Vector&, std::size_t u) { return u == 1; });
    const auto rmodel = std::make_shared<const Model>(restricted);
    const SafetyOrientedController r(rmodel, threshold(f.result.values, 0.5), f.result.policies,
                                     FallbackPolicy::constant(0), {Box::interval(-1e-3, 1e-3)});
    for (double x : {19.0, 20.5, 21.8, 25.0}) CHECK(r.act(Vector::Constant(1, x), 3).control == 1);
}

TEST_CASE("closed-loop invariance from safe-set nodes") {
    const SafetyOrientedController c = tcl_controller(0.95);
    const Model& model = c.model();
    const SafeSetFamily& sets = c.sets();
    const StateGrid& grid = sets.grid();
    const Box w = tcl_support();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(w.lo(0), w.hi(0));
    // fallback steps from member nodes always land in the next set
    for (std::size_t t = 0; t < 18; ++t) {
        for (std::size_t k = 0; k < grid.size(); ++k) {
            if (!sets.node_member(t, k)) continue;
            const Vector x = grid.node(k);
            const Action a = c.act(x, t);
            if (a.branch != Branch::Fallback) continue;
            for (int s = 0; s < 20; ++s) {
                const Vector next = model.dynamics.step(x, model.controls[a.control], Vector::Constant(1, unif(rng)));
                CHECK(sets.contains(t + 1, next));
            }
        }
    }

    // empirical safety from members of S_0 under laws inside the ambiguity set
    std::vector<NominalDistribution> laws = {NominalDistribution::uniform(w),
                                             NominalDistribution::atoms(AtomSet{1, {-0.1, 0.3}, {0.5, 0.5}}),
                                             NominalDistribution::atoms(AtomSet{1, {-0.25, 0.25}, {0.5, 0.5}})};
    std::size_t checked = 0;
    for (std::size_t k = 0; k < grid.size(); k += 7) {
        if (!sets.node_member(0, k)) continue;
        for (const auto& law : laws) {
            const std::size_t n = 2000;
            const SimulationReport rep = monte_carlo(model, as_policy(c), law, grid.node(k), n, 11 + k);
            const double se = std::sqrt(0.95 * 0.05 / n);
            CHECK(rep.probability >= 0.95 - 2 * se);
            ++checked;
        }
    }
    CHECK(checked > 0);
}
