#include "decompgrind/config.hpp"
#include "decompgrind/orchestrator.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <set>
#include <sstream>

using namespace decompgrind;

namespace {

// Small stacked cylinder that grinds in a few simulated seconds.
WorkpieceSpec small_spec() {
    WorkpieceSpec s;
    s.name = "small";
    s.base = {8.0, 2.0};
    s.target = {{4.0, 2.0}};
    s.removable = {{8.0, 1.5}};
    s.resolution = 1.0;
    return s;
}

RunConfig fast_config() {
    RunConfig cfg = default_run_config();
    cfg.planning_time = 0.0;
    cfg.hybrid_duration = 2.0;
    cfg.max_cycles = 4;
    return cfg;
}

RunReport with_trace(std::vector<ErrorSample> trace) {
    RunReport r;
    r.trace = std::move(trace);
    r.initial_error = r.trace.front().error;
    r.final_error = r.trace.back().error;
    return r;
}

}  // namespace

TEST_CASE("method names") {
    const auto all = all_methods();
    CHECK(all.size() == 6);
    std::set<std::string> names;
    for (auto m : all) {
        names.insert(std::string(to_string(m)));
        CHECK(parse_method(to_string(m)) == m);
    }
    CHECK(names.count("Rand-Hyb") == 1);
    CHECK(names.count("CSP-Hyb") == 1);
    CHECK(names.count("Demo-Speed-1") == 1);
    CHECK(names.count("BCIL-full") == 1);
    CHECK_THROWS_AS(parse_method("Nope"), std::invalid_argument);
}

TEST_CASE("generated workpieces") {
    SUBCASE("named dimensions") {
        const auto t1 = named_workpiece("WP-T1");
        CHECK(t1.removable.front().diameter == 10.0);
        CHECK(t1.removable.front().height == 20.0);
        CHECK(t1.density == 30.0);
        const auto s5 = named_workpiece("WP-S5");
        CHECK(s5.removable.front().diameter == 25.0);
        CHECK(s5.removable.front().height == 10.0);
        CHECK(s5.density == 60.0);
        CHECK(workpiece_names().size() == 10);
        CHECK_THROWS(named_workpiece("WP-X9"));
    }
    SUBCASE("target is a subset of the initial shape") {
        const auto gw = gen_workpiece(small_spec(), 4);
        std::set<std::tuple<double, double, double>> init;
        for (const auto& p : gw.initial.points()) init.insert({p.x(), p.y(), p.z()});
        for (const auto& p : gw.target.points()) CHECK(init.count({p.x(), p.y(), p.z()}) == 1);
        CHECK(gw.target.size() < gw.initial.size());
        CHECK(gw.interface.offset == doctest::Approx(small_spec().interface_height()));
        // volume matches the solid to within the sampling error
        const double solid = std::numbers::pi * (16.0 * 2.0 + 4.0 * 2.0 + 16.0 * 1.5);
        CHECK(gw.initial.volume() == doctest::Approx(solid).epsilon(0.1));
    }
    SUBCASE("seeded and observable") {
        const auto a = gen_workpiece(small_spec(), 9), b = gen_workpiece(small_spec(), 9);
        REQUIRE(a.initial.size() == b.initial.size());
        CHECK(a.initial[5] == b.initial[5]);
        const auto obs = observe(a.initial, a.cell_size, 2);
        CHECK(obs.size() < a.initial.size());
        CHECK(obs.volume() == doctest::Approx(a.initial.volume()).epsilon(0.25));
        CHECK(observe(a.initial, a.cell_size, 1).size() == a.initial.size());
    }
    SUBCASE("bad specs") {
        auto s = small_spec();
        s.removable.clear();
        CHECK_THROWS(s.validate());
        s = small_spec();
        s.base.diameter = 0;
        CHECK_THROWS(s.validate());
    }
}

TEST_CASE("metrics") {
    SUBCASE("single value has zero spread") {
        const auto s = mean_std({4.2});
        CHECK(s.mean == 4.2);
        CHECK(s.stdev == 0.0);
    }
    SUBCASE("three values") {
        const auto s = mean_std({1.0, 2.0, 4.0});
        CHECK(s.mean == doctest::Approx(7.0 / 3.0));
        // deviations -4/3, -1/3, 5/3: squares sum to 42/9, over n - 1 = 2
        CHECK(s.stdev == doctest::Approx(std::sqrt(7.0 / 3.0)));
    }
    SUBCASE("threshold and first crossing") {
        CHECK(error_threshold(10.0, 2.0) == doctest::Approx(1.6));
        const auto r = with_trace({{50.5, 10.0}, {120.0, 4.0}, {200.0, 1.5}, {260.0, 1.4}});
        CHECK(time_to_threshold(r, 1.6) == 200.0);
        CHECK(time_to_threshold(r, 10.0) == 50.5);
        CHECK(std::isinf(time_to_threshold(r, 1.0)));
    }
    SUBCASE("summary") {
        auto a = with_trace({{1.0, 5.0}, {2.0, 1.0}});
        auto b = with_trace({{1.0, 5.0}, {3.0, 1.0}});
        a.execution_time = 10.0;
        b.execution_time = 14.0;
        a.method = b.method = "Proposed";
        a.workpiece = b.workpiece = "WP-E1";
        b.in_limit_ratio = 0.5;
        const auto s = summarize({a, b}, 2.0);
        CHECK(s.runs == 2);
        CHECK(s.execution_time.mean == 12.0);
        CHECK(s.execution_time.stdev == doctest::Approx(std::sqrt(8.0)));
        CHECK(s.time_to_threshold.mean == 2.5);
        CHECK(s.aborted_runs == 1);
        std::ostringstream out;
        write_summary_csv(out, {s});
        CHECK(out.str().find("Proposed,WP-E1,2,12,") != std::string::npos);
    }
}

TEST_CASE("a workpiece already at its target stops after two observations") {
    auto spec = small_spec();
    spec.removable = {{8.0, 1e-3}};  // thinner than a lattice cell, so nothing is sampled
    const auto gw = gen_workpiece(spec, 1);
    REQUIRE(gw.initial.size() == gw.target.size());
    MethodResources res;
    res.demo_feed_2 = 0.2;
    const auto r = run_baseline(MethodVariant::DemoSpeed2, spec, fast_config(), res, 1);
    CHECK(r.termination == "converged");
    CHECK(r.observations == 2);
    CHECK(r.grinding_time == 0.0);
    CHECK(r.surfaces_ground == 0);
    CHECK(r.in_limit_ratio == 1.0);
    CHECK(r.execution_time == doctest::Approx(2 * 50.5));
}

TEST_CASE("baseline loop bookkeeping") {
    const auto spec = small_spec();
    const auto cfg = fast_config();
    MethodResources res;
    const auto r = run_baseline(MethodVariant::CspHyb, spec, cfg, res, 2);
    CHECK(r.trace.size() == static_cast<std::size_t>(r.observations));
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].time > r.trace[i - 1].time);
    CHECK(r.planning_steps <= cfg.planner.replan_observation_period * (r.observations - 1));
    CHECK(r.execution_time >= r.grinding_time);
    CHECK(r.execution_time ==
          doctest::Approx(r.grinding_time + r.observation_time + r.planning_time).epsilon(1e-9));
    CHECK(r.final_error <= r.initial_error);
    CHECK(r.surfaces_ground > 0);

    const auto parsed = nlohmann::json::parse(report_json(r));
    CHECK(parsed["method"] == "CSP-Hyb");
    CHECK(parsed["trace"].size() == r.trace.size());
    CHECK(parsed["observations"] == r.observations);

    std::ostringstream csv;
    write_error_trace_csv(csv, r);
    const std::string text = csv.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(r.trace.size()) + 1);
}

TEST_CASE("Rand-Hyb is reproducible per seed") {
    auto cfg = fast_config();
    cfg.surface_budget = 3;
    const auto a = run_baseline(MethodVariant::RandHyb, small_spec(), cfg, {}, 7);
    const auto b = run_baseline(MethodVariant::RandHyb, small_spec(), cfg, {}, 7);
    REQUIRE(a.surfaces.size() == b.surfaces.size());
    for (std::size_t i = 0; i < a.surfaces.size(); ++i) CHECK(a.surfaces[i] == b.surfaces[i]);
    CHECK(a.final_error == b.final_error);
    CHECK(a.execution_time == b.execution_time);
    CHECK(a.planning_steps <= 3);
    const auto c = run_baseline(MethodVariant::RandHyb, small_spec(), cfg, {}, 8);
    CHECK_FALSE(c.surfaces.front() == a.surfaces.front());
}

TEST_CASE("constant feed from the harder demonstration trips the limit") {
    MethodResources res;
    res.demo_feed_1 = 2.86;
    const auto r = run_single_removal(MethodVariant::DemoSpeed1, named_workpiece("WP-S5"), default_run_config(), res, 1);
    CHECK(r.termination == "force_limit");
    CHECK(r.in_limit_ratio < 1.0);
    CHECK(r.observations == 0);
}

TEST_CASE("missing resources are reported") {
    CHECK_THROWS_AS(run_baseline(MethodVariant::Proposed, small_spec(), fast_config(), {}, 1), std::invalid_argument);
    CHECK_THROWS_AS(run_baseline(MethodVariant::DemoSpeed1, small_spec(), fast_config(), {}, 1),
                    std::invalid_argument);
}

TEST_CASE("config file") {
    SUBCASE("empty text keeps the defaults") {
        std::istringstream in("");
        const auto c = parse_config(in);
        const auto d = default_app_config();
        CHECK(c.window == d.window);
        CHECK(c.run.grind.force_limit == 9.0);
        CHECK(c.run.sim.gains.kp.normal == 360.0);
        CHECK(c.bench.seeds == std::vector<std::uint64_t>{1, 2, 3});
    }
    SUBCASE("values override") {
        std::istringstream in(
            "[sim]\nkp = 200\nforce_limit = 8.5\n[planner]\nhorizon = 3\ntheta_deg = -10,0,10\n"
            "[policy]\nwindow = 10\nhidden = 32\n[expert]\ntarget_force = 3.5\nworkpieces = WP-T1\n"
            "[bench]\nmethods = Proposed, Rand-Hyb\nseeds = 4,5\n");
        const auto c = parse_config(in);
        CHECK(c.run.sim.gains.kp.normal == 200.0);
        CHECK(c.run.grind.force_limit == 8.5);
        CHECK(c.run.planner.horizon == 3);
        CHECK(c.run.planner.theta_grid.size() == 3);
        CHECK(c.window == 10);
        CHECK(c.model.hidden == 32);
        CHECK(c.demo.expert.target_force == 3.5);
        CHECK(c.demo_workpieces == std::vector<std::string>{"WP-T1"});
        CHECK(c.bench.methods == std::vector<MethodVariant>{MethodVariant::Proposed, MethodVariant::RandHyb});
        CHECK(c.bench.seeds == std::vector<std::uint64_t>{4, 5});
        // the expert runs on the same plant as the grinding loop
        CHECK(c.demo.sim.gains.kp.normal == 200.0);
        CHECK(c.demo.force_limit == 8.5);
    }
    SUBCASE("round trip") {
        auto c = default_app_config();
        c.model.layers = 3;
        c.run.hybrid_duration = 7.5;
        c.demo.perturb_sigma = 0.25;
        std::stringstream ss;
        write_config(ss, c);
        const auto back = parse_config(ss);
        CHECK(back.model.layers == 3);
        CHECK(back.run.hybrid_duration == 7.5);
        CHECK(back.demo.perturb_sigma == 0.25);
        CHECK(back.run.planner.psi_grid.size() == c.run.planner.psi_grid.size());
        CHECK(back.run.planner.psi_grid.back() == doctest::Approx(c.run.planner.psi_grid.back()));
    }
    SUBCASE("errors") {
        std::istringstream unknown_key("[sim]\nmass_typo = 1\n");
        CHECK_THROWS_AS(parse_config(unknown_key), ConfigError);
        std::istringstream unknown_section("[simulation]\nmass = 1\n");
        CHECK_THROWS_AS(parse_config(unknown_section), ConfigError);
        std::istringstream malformed("[sim]\nmass = heavy\n");
        CHECK_THROWS_AS(parse_config(malformed), ConfigError);
        std::istringstream invalid("[planner]\nhorizon = 0\n");
        CHECK_THROWS_AS(parse_config(invalid), ConfigError);
        CHECK_THROWS_AS(load_config("/nonexistent/decompgrind.ini"), ConfigError);
    }
}
