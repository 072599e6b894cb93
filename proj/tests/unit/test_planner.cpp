#include "decompgrind/planner.hpp"
#include "decompgrind/workpiece.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <numbers>
#include <optional>
#include <random>

using namespace decompgrind;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

using oracle::OracleCandidate;
using oracle::oracle_candidates;
using oracle::oracle_exhaustive;
using oracle::oracle_stage;

std::vector<Point3> pts(const PointCloud& c) { return {c.points().begin(), c.points().end()}; }

// A block with a bump on top (+x) and a notch of extra material on one side.
PointCloud protrusion_block(double spacing = 1.0) {
    std::vector<Point3> p;
    for (double x = 0; x <= 6; x += spacing)
        for (double y = 0; y <= 4; y += spacing)
            for (double z = 0; z <= 2; z += spacing) {
                const bool base = x <= 3;
                const bool bump = y >= 2 && x <= 6;
                const bool side = y <= 1 && x <= 4;
                if (base || bump || side) p.push_back({x, y, z});
            }
    return PointCloud(p, spacing * spacing * spacing);
}

PointCloud below(const PointCloud& c, double x) {
    std::vector<Point3> p;
    for (const auto& q : c.points())
        if (q.x() <= x) p.push_back(q);
    return PointCloud(p, c.point_volume());
}

PlannerConfig small_config(const PointCloud& cloud, int horizon, PlannerSearch search) {
    PlannerConfig cfg;
    cfg.theta_grid = {-20 * kDeg, 0.0, 20 * kDeg};
    cfg.psi_grid = {-20 * kDeg, 0.0, 20 * kDeg};
    fit_x_grid(cfg, cloud, 1.0);
    cfg.horizon = horizon;
    cfg.search = search;
    return cfg;
}

}  // namespace

TEST_CASE("stage cost") {
    const PointCloud shape({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}});
    const PointCloud target({{0, 0, 0}, {1, 0, 0}});
    SUBCASE("non-intersecting surface costs only the chamfer") {
        CHECK(cost(target, shape, {0, 0, 10}, 0.7) == doctest::Approx(oracle::chamfer(pts(shape), pts(target))));
    }
    SUBCASE("removal term") {
        CHECK(removal_cost({10.0, 2.0}, 0.001, 1.0) == doctest::Approx(5.0));
        CHECK(removal_cost({0.0, 0.0}, 1.0, 1.0) == 0.0);
        // thin removal uses the sampling length as its height
        CHECK(removal_cost({8.0, 0.0}, 8.0, 1.0) == doctest::Approx(4.0));
    }
    SUBCASE("shape equal to target") {
        CHECK(cost(target, target, {0, 0, 5}, 1.0) == 0.0);
    }
    SUBCASE("matches the oracle on random inputs") {
        std::mt19937_64 rng(21);
        for (int k = 0; k < 40; ++k) {
            const auto a = oracle::random_points(rng, 80, 0, 5);
            const auto b = oracle::random_points(rng, 50, 0, 4);
            const OracleCandidate c{0.3, -0.2, 2.5};
            const auto expected = oracle_stage(a, b, c, 0.5, 0.01);
            REQUIRE(expected);
            CHECK(cost(PointCloud(b, 0.5), PointCloud(a, 0.5), {c.theta, c.psi, c.x}, 0.01) ==
                  doctest::Approx(expected->cost).epsilon(1e-12));
        }
    }
}

TEST_CASE("plan on a 1-D bar selects the boundary plane") {
    std::vector<Point3> bar;
    for (int i = 0; i < 10; ++i) bar.push_back({double(i), 0, 0});
    const PointCloud current(bar);
    const PointCloud target(std::vector<Point3>(bar.begin(), bar.begin() + 5));
    PlannerConfig cfg;
    cfg.theta_grid = {0.0};
    cfg.psi_grid = {0.0};
    for (int x = -1; x <= 10; ++x) cfg.x_grid.push_back(x);
    cfg.horizon = 1;
    for (auto search : {PlannerSearch::Auto, PlannerSearch::Greedy, PlannerSearch::Exhaustive}) {
        cfg.search = search;
        const auto r = plan(current, target, cfg);
        REQUIRE(r.surfaces.size() == 1);
        CHECK(r.surfaces[0].offset == 4.0);
        CHECK(r.predicted_shapes.back().size() == 5);
        CHECK(chamfer(r.predicted_shapes.back(), target) == 0.0);
        const auto cands = oracle_candidates(cfg);
        CHECK(r.objective == doctest::Approx(oracle_exhaustive(bar, pts(target), cands, 1, 1.0, cfg.k_c)));
    }
}

TEST_CASE("plan when the shape already equals the target") {
    const auto block = protrusion_block();
    auto cfg = small_config(block, 1, PlannerSearch::Auto);
    const auto r = plan(block, block, cfg);
    CHECK(r.objective == 0.0);
    CHECK(r.predicted_shapes.back().size() == block.size());
    CHECK(removal_metrics(block, r.surfaces[0]).volume == 0.0);
}

TEST_CASE("exhaustive plan equals the enumeration oracle on small grids") {
    const auto block = protrusion_block();
    const auto target = below(block, 3.0);
    for (int h : {1, 2}) {
        auto cfg = small_config(block, h, PlannerSearch::Auto);
        const auto r = plan(block, target, cfg);
        const double expected = oracle_exhaustive(pts(block), pts(target), oracle_candidates(cfg), h,
                                                  block.point_volume(), cfg.k_c) / h;
        CHECK(r.objective == doctest::Approx(expected).epsilon(1e-12));
        CHECK(r.surfaces.size() == static_cast<std::size_t>(h));
        CHECK(r.per_step_cost.size() == static_cast<std::size_t>(h));
        CHECK(r.predicted_shapes.size() == static_cast<std::size_t>(h + 1));
    }
    std::mt19937_64 rng(31);
    for (int k = 0; k < 4; ++k) {
        const auto cloud = oracle::random_points(rng, 30, 0, 4);
        const auto tgt = oracle::random_points(rng, 15, 0, 2.5);
        auto cfg = small_config(PointCloud(cloud), 2, PlannerSearch::Exhaustive);
        const auto r = plan(PointCloud(cloud), PointCloud(tgt), cfg);
        const double expected = oracle_exhaustive(cloud, tgt, oracle_candidates(cfg), 2, 1.0, cfg.k_c) / 2;
        CHECK(r.objective == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("greedy plan takes the stage-wise minimum") {
    const auto block = protrusion_block();
    const auto target = below(block, 3.0);
    auto cfg = small_config(block, 2, PlannerSearch::Greedy);
    const auto r = plan(block, target, cfg);
    auto shape = pts(block);
    const auto cands = oracle_candidates(cfg);
    for (int h = 0; h < 2; ++h) {
        double best = std::numeric_limits<double>::infinity();
        std::vector<Point3> next;
        for (const auto& c : cands) {
            const auto s = oracle_stage(shape, pts(target), c, block.point_volume(), cfg.k_c);
            if (s && s->cost < best) {
                best = s->cost;
                next = s->kept;
            }
        }
        CHECK(r.per_step_cost[h] == doctest::Approx(best).epsilon(1e-12));
        CHECK(r.predicted_shapes[h + 1].size() == next.size());
        shape = next;
    }
    // chamfer never gets worse than doing nothing
    CHECK(chamfer(r.predicted_shapes.back(), target) <= chamfer(block, target));
    CHECK(r.per_step_cost[1] <= r.per_step_cost[0] + 1e-12);
}

TEST_CASE("rollout consistency, determinism and next_surface") {
    std::mt19937_64 rng(41);
    for (auto search : {PlannerSearch::Greedy, PlannerSearch::Exhaustive}) {
        const PointCloud cloud(oracle::random_points(rng, 60, 0, 5));
        const PointCloud target(oracle::random_points(rng, 30, 0, 3));
        auto cfg = small_config(cloud, 2, search);
        const auto a = plan(cloud, target, cfg);
        const auto b = plan(cloud, target, cfg);
        for (std::size_t h = 0; h < a.surfaces.size(); ++h) {
            CHECK(a.surfaces[h] == b.surfaces[h]);
            const auto again = split(a.predicted_shapes[h], a.surfaces[h]).next_shape;
            REQUIRE(again.size() == a.predicted_shapes[h + 1].size());
            for (std::size_t i = 0; i < again.size(); ++i) CHECK(again[i] == a.predicted_shapes[h + 1][i]);
        }
        CHECK(a.objective == b.objective);
        CHECK(next_surface(cloud, target, cfg) == a.surfaces[0]);
    }
}

TEST_CASE("prediction never worsens the chamfer when a no-op candidate exists") {
    std::mt19937_64 rng(43);
    for (int k = 0; k < 10; ++k) {
        const PointCloud cloud(oracle::random_points(rng, 50, 0, 6));
        const PointCloud target(oracle::random_points(rng, 25, 0, 4));
        auto cfg = small_config(cloud, 1, PlannerSearch::Greedy);
        cfg.x_grid.push_back(cfg.x_grid.back() + 20.0);
        const auto r = plan(cloud, target, cfg);
        CHECK(chamfer(r.predicted_shapes.back(), target) <= chamfer(cloud, target) + 1e-12);
    }
}

TEST_CASE("stage evaluator agrees with the direct cost") {
    std::mt19937_64 rng(47);
    const PointCloud shape(oracle::random_points(rng, 2500, 0, 10), 0.2);
    const PointCloud target(oracle::random_points(rng, 900, 0, 6), 0.2);
    const StageEvaluator eval(shape, target);
    auto cfg = small_config(shape, 1, PlannerSearch::Greedy);
    for (std::size_t k = 0; k < cfg.candidate_count(); k += 7) {
        const auto c = cfg.candidate(k);
        const double direct = removal_metrics(shape, c).volume >= shape.volume()
                                  ? std::numeric_limits<double>::infinity()
                                  : cost(target, shape, c, cfg.k_c);
        if (std::isinf(direct)) {
            CHECK(std::isinf(eval.evaluate(c, cfg.k_c)));
        } else {
            CHECK(eval.evaluate(c, cfg.k_c) == doctest::Approx(direct).epsilon(1e-10));
        }
    }
    double best = 0.0;
    const auto idx = eval.argmin(cfg, &best);
    double brute = std::numeric_limits<double>::infinity();
    std::size_t brute_idx = StageEvaluator::npos;
    for (std::size_t k = 0; k < cfg.candidate_count(); ++k) {
        const double v = eval.evaluate(cfg.candidate(k), cfg.k_c);
        if (v < brute) {
            brute = v;
            brute_idx = k;
        }
    }
    CHECK(idx == brute_idx);
    CHECK(best == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("selected surface on a stacked-cylinder workpiece spares the target") {
    const auto wp = gen_workpiece(named_workpiece("WP-E1"), 3);
    const auto current = observe(wp.initial, wp.cell_size, 2);
    const auto target = observe(wp.target, wp.cell_size, 2);
    const auto cfg = default_planner_config(current);
    const auto s = next_surface(current, target, cfg);
    const auto removal = split(current, s).removal_shape;
    CHECK(removal.size() > 0);
    for (const auto& p : target.points()) CHECK_FALSE(s.signed_distance(p) > 0.0);
}

TEST_CASE("closed-loop replanning drives the chamfer down") {
    const auto block = protrusion_block(0.5);
    const auto target = below(block, 3.0);
    auto cfg = default_planner_config(block, 0.5);
    cfg.horizon = 2;
    PointCloud shape = block;
    double prev = chamfer(shape, target);
    for (int i = 0; i < 8; ++i) {
        const auto c = next_surface(shape, target, cfg);
        auto next = split(shape, c).next_shape;
        if (next.size() == shape.size()) break;
        shape = std::move(next);
        const double e = chamfer(shape, target);
        CHECK(e <= prev + 1e-12);
        prev = e;
    }
    CHECK(prev < 0.05 * chamfer(block, target));
}

TEST_CASE("planner configuration errors") {
    const PointCloud c({{0, 0, 0}, {1, 0, 0}});
    PlannerConfig cfg;
    cfg.theta_grid = {0};
    cfg.psi_grid = {0};
    cfg.x_grid = {-5};
    CHECK_THROWS_AS(plan(c, c, cfg), PlannerError);  // every candidate empties the shape
    cfg.x_grid = {};
    CHECK_THROWS_AS(cfg.validate(), PlannerError);
    cfg.x_grid = {0};
    cfg.horizon = 0;
    CHECK_THROWS_AS(cfg.validate(), PlannerError);
    cfg.horizon = 1;
    cfg.k_c = -1;
    CHECK_THROWS_AS(cfg.validate(), PlannerError);
}

TEST_CASE("default grids") {
    const auto block = protrusion_block();
    const auto cfg = default_planner_config(block);
    REQUIRE(cfg.theta_grid.size() == 7);
    CHECK(cfg.theta_grid.front() == doctest::Approx(-30 * kDeg));
    CHECK(cfg.psi_grid.back() == doctest::Approx(30 * kDeg));
    CHECK(cfg.horizon == 2);
    CHECK(cfg.replan_observation_period == 2);
    for (double t : cfg.theta_grid)
        for (double p : cfg.psi_grid)
            for (const auto& q : block.points()) {
                const double k = oracle::plane_normal(t, p).dot(q);
                CHECK(k >= cfg.x_grid.front() - 1e-9);
                CHECK(k <= cfg.x_grid.back() + 1e-9);
            }
}
