#include "decompgrind/demo_expert.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace decompgrind;

namespace {

ExpertState settled(double offset, double perceived) {
    ExpertState s;
    s.started = true;
    s.offset = offset;
    s.log_lead = std::log(offset);
    s.perceived_force = perceived;
    return s;
}

ContactState follower_with_tangential_force(double f) {
    ContactState c;
    c.position = {1.5, 0.0};
    c.velocity = {0.3, 0.0};
    c.force = {-2.0 * f, -f};
    return c;
}

// Synthetic episode with distinguishable samples: x_N of sample k is k.
Episode ramp_episode(int samples, double rate_hz, const std::string& name = "ramp") {
    Episode e;
    e.workpiece = name;
    e.rate_hz = rate_hz;
    for (int k = 0; k < samples; ++k) {
        EpisodeSample s;
        s.time = k / rate_hz;
        s.follower.position.normal = k;
        s.follower.force = {-0.1 * k, -0.05 * k};
        s.leader.position.normal = k + 0.5;
        s.leader.force = -s.follower.force;
        s.leader.role = Role::Leader;
        e.samples.push_back(s);
    }
    return e;
}

DemoConfig quick_config() {
    DemoConfig cfg;
    cfg.perturb_sigma = 0.0;
    return cfg;
}

}  // namespace

TEST_CASE("expert law signs") {
    const ExpertGains g;
    SUBCASE("on target the lead holds") {
        auto s = settled(0.2, 4.0);
        const auto f = follower_with_tangential_force(4.0);
        const auto l = expert_leader(f, 4.0, g, s, 1e-3);
        CHECK(l.position.normal - f.position.normal == doctest::Approx(0.2).epsilon(1e-12));
        CHECK(l.velocity.normal == doctest::Approx(f.velocity.normal));
    }
    SUBCASE("too much force pulls the leader back") {
        auto s = settled(0.2, 8.0);
        const auto f = follower_with_tangential_force(8.0);
        const auto l = expert_leader(f, 4.0, g, s, 1e-3);
        CHECK(l.position.normal - f.position.normal < 0.2);
        CHECK(l.velocity.normal < f.velocity.normal);
    }
    SUBCASE("too little force pushes it forward") {
        auto s = settled(0.2, 1.0);
        const auto f = follower_with_tangential_force(1.0);
        const auto l = expert_leader(f, 4.0, g, s, 1e-3);
        CHECK(l.position.normal - f.position.normal > 0.2);
    }
    SUBCASE("action and reaction, bounded change") {
        auto s = settled(0.2, 0.0);
        const auto f = follower_with_tangential_force(0.0);
        ExpertGains fast = g;
        fast.ki = 1e6;
        const auto l = expert_leader(f, 4.0, fast, s, 1e-3);
        CHECK(l.position.normal - f.position.normal <= 0.2 + fast.max_rate * 1e-3 + 1e-12);
        const auto l2 = expert_leader(follower_with_tangential_force(3.0), 4.0, g, s, 1e-3);
        CHECK(l2.force == -follower_with_tangential_force(3.0).force);
        CHECK(l2.role == Role::Leader);
    }
    SUBCASE("rejects a non-positive target") {
        auto s = settled(0.2, 0.0);
        CHECK_THROWS(expert_leader(follower_with_tangential_force(0.0), 0.0, g, s, 1e-3));
    }
}

TEST_CASE("expert holds 4 N on uniform material") {
    for (const char* name : {"WP-T1", "WP-T2", "WP-S3"}) {
        CAPTURE(name);
        const auto spec = named_workpiece(name);
        const auto gw = gen_workpiece(spec, 5);
        DemoConfig cfg = quick_config();
        SimParams params = cfg.sim;
        params.cell_size = gw.cell_size;
        auto sim = make_sim(gw.initial, material_from_density(spec.density, cfg.base_k_r), cfg.mount, params);
        position_at_contact(sim, gw.interface);
        cfg.duration = 3.0;
        const auto ep = record_episode(sim, gw.interface, cfg, name);
        REQUIRE(ep.samples.size() > 2500);
        for (const auto& s : ep.samples) {
            if (s.time >= 1.0) CHECK(std::abs(std::abs(s.follower.force.tangential) - 4.0) < 0.4);
        }
    }
}

TEST_CASE("recorded demonstrations") {
    DemoConfig cfg;  // with the default perturbation
    const std::vector<WorkpieceSpec> wps = {named_workpiece("WP-T1"), named_workpiece("WP-T2")};
    const auto eps = record_demonstrations(wps, 5, cfg, 1);
    REQUIRE(eps.size() == 10);
    CHECK(eps[0].workpiece == "WP-T1");
    CHECK(eps[9].workpiece == "WP-T2");
    for (const auto& e : eps) {
        CHECK_NOTHROW(e.validate());
        CHECK(e.rate_hz == 1000.0);
        CHECK(e.duration() <= cfg.duration + cfg.dt + 1e-9);
        for (const auto& s : e.samples) {
            CHECK(s.leader.force.normal + s.follower.force.normal == 0.0);
            CHECK(s.leader.force.tangential + s.follower.force.tangential == 0.0);
            CHECK(std::abs(s.follower.force.tangential) <= cfg.force_limit);
        }
    }
    const auto again = record_demonstrations(wps, 5, cfg, 1);
    CHECK(again[3].samples.back().follower.position.normal == eps[3].samples.back().follower.position.normal);
    CHECK(mean_feed(eps) > 0.0);
    CHECK_THROWS(record_demonstrations(wps, 0, cfg, 1));
}

TEST_CASE("dataset windows") {
    SUBCASE("count per episode") {
        // 6.05 s at 1 kHz decimates to T = 121 samples at 20 Hz; t = n..T-1 gives T - n windows
        const auto d = build_dataset({ramp_episode(6050, 1000.0)}, 20, 20.0);
        CHECK(d.windows.size() == 101);
        CHECK(d.n == 20);
        CHECK(d.rate_hz == 20.0);
        // first window covers decimated samples 1..20 and targets sample 21 (1-based)
        CHECK(d.windows[0].follower.front().position.normal == 0.0);
        CHECK(d.windows[0].follower.back().position.normal == 19 * 50.0);
        CHECK(d.windows[0].leader_next.position.normal == 20 * 50.0 + 0.5);
    }
    SUBCASE("n = 1 gives state and next leader pairs") {
        const auto d = build_dataset({ramp_episode(10, 20.0)}, 1, 20.0);
        REQUIRE(d.windows.size() == 9);
        for (std::size_t i = 0; i < d.windows.size(); ++i) {
            CHECK(d.windows[i].follower.size() == 1);
            CHECK(d.windows[i].leader_next.position.normal == d.windows[i].follower[0].position.normal + 1.5);
        }
    }
    SUBCASE("windows stay inside their episode") {
        const auto d = build_dataset({ramp_episode(30, 20.0, "a"), ramp_episode(25, 20.0, "b")}, 5, 20.0);
        CHECK(d.windows.size() == (30 - 5) + (25 - 5));
        for (const auto& w : d.windows) {
            for (std::size_t i = 1; i < w.follower.size(); ++i) {
                CHECK(w.follower[i].position.normal == w.follower[i - 1].position.normal + 1.0);
            }
            CHECK(w.leader_next.position.normal == w.follower.back().position.normal + 1.5);
        }
    }
    SUBCASE("ten six-second episodes give about 1200 transitions") {
        std::vector<Episode> eps(10, ramp_episode(6000, 1000.0));
        const auto d = build_dataset(eps, 20, 20.0, nullptr, true);
        CHECK(d.windows.size() == 10 * (120 - 1));
        const auto plain = build_dataset(eps, 20, 20.0);
        CHECK(plain.windows.size() == 10 * (120 - 20));
    }
    SUBCASE("start padding repeats the first sample") {
        const auto d = build_dataset({ramp_episode(10, 20.0)}, 4, 20.0, nullptr, true);
        REQUIRE(d.windows.size() == 9);
        for (const auto& f : d.windows[0].follower) CHECK(f.position.normal == 0.0);
        CHECK(d.windows[0].leader_next.position.normal == 1.5);
    }
    SUBCASE("short episodes are skipped and named") {
        std::vector<std::string> skipped;
        const auto d = build_dataset({ramp_episode(3, 20.0, "short"), ramp_episode(8, 20.0)}, 5, 20.0, &skipped);
        CHECK(d.windows.size() == 3);
        REQUIRE(skipped.size() == 1);
        CHECK(skipped[0] == "short");
    }
    SUBCASE("bad arguments") {
        CHECK_THROWS(build_dataset({ramp_episode(10, 20.0)}, 0, 20.0));
        CHECK_THROWS(build_dataset({ramp_episode(100, 1000.0)}, 2, 300.0));
    }
    SUBCASE("truncate") {
        const auto d = build_dataset({ramp_episode(30, 20.0)}, 5, 20.0);
        CHECK(truncate_dataset(d, 7).windows.size() == 7);
        CHECK(truncate_dataset(d, 1000).windows.size() == d.windows.size());
    }
}

TEST_CASE("episode and dataset text round trips") {
    const auto e = ramp_episode(12, 20.0, "rt");
    std::stringstream ss;
    write_episode_csv(ss, e);
    const auto back = read_episode_csv(ss, "rt", 20.0);
    REQUIRE(back.samples.size() == e.samples.size());
    CHECK(back.samples[7].follower.force.tangential == e.samples[7].follower.force.tangential);
    CHECK(back.samples[7].leader.position.normal == e.samples[7].leader.position.normal);
    CHECK(back.samples[7].time == doctest::Approx(e.samples[7].time));

    const auto d = build_dataset({e}, 3, 20.0);
    std::stringstream ds;
    write_dataset(ds, d);
    const auto dback = read_dataset(ds);
    CHECK(dback.n == 3);
    CHECK(dback.rate_hz == 20.0);
    REQUIRE(dback.windows.size() == d.windows.size());
    CHECK(dback.windows[4].follower[2].position.normal == d.windows[4].follower[2].position.normal);
    CHECK(dback.windows[4].leader_next.force.normal == d.windows[4].leader_next.force.normal);

    Episode bad = e;
    bad.samples[3].time = bad.samples[2].time;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("channel packing") {
    ContactState s;
    s.position = {1, 2};
    s.velocity = {3, 4};
    s.force = {5, 6};
    const auto c = channels(s);
    CHECK(c == std::array<double, kStateDim>{1, 2, 3, 4, 5, 6});
    const auto back = from_channels(c.data(), Role::Leader);
    CHECK(back.position == s.position);
    CHECK(back.force == s.force);
    CHECK(back.role == Role::Leader);
}
