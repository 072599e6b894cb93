#include "decompgrind/grind_sim.hpp"

#include <doctest.h>

#include <sstream>

using namespace decompgrind;

namespace {

// Box of lattice cell centres, cross-section side x side mm, occupying
// x in [-depth, 0] so its top face sits on the belt plane at x_N = 0.
PointCloud box(double side, double depth, double s) {
    std::vector<Point3> p;
    const int nx = static_cast<int>(std::round(depth / s));
    const int ny = static_cast<int>(std::round(side / s));
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j)
            for (int k = 0; k < ny; ++k) p.push_back({-(i + 0.5) * s, (j + 0.5) * s, (k + 0.5) * s});
    return PointCloud(p, s * s * s);
}

GrindSimState box_sim(double s = 0.5, double cell = 0.5) {
    SimParams params;
    params.cell_size = cell;
    return make_sim(box(10.0, 5.0, s), MaterialModel{}, MountConfig{}, params);
}

ContactState leader_at(double x, double v = 0.0) {
    ContactState l;
    l.role = Role::Leader;
    l.position.normal = x;
    l.velocity.normal = v;
    return l;
}

}  // namespace

TEST_CASE("resistance") {
    const MaterialModel m{2.0, 0.5, 6.0, 30.0};
    const auto r = resistance(3.0, m);
    CHECK(r.normal == doctest::Approx(1.0));
    CHECK(r.tangential == doctest::Approx(0.5));
    CHECK(resistance(0.0, m).normal == 0.0);
    CHECK(resistance(0.0, m).tangential == 0.0);
    CHECK(resistance(6.0, m).normal == doctest::Approx(2.0 * r.normal));
    CHECK(resistance(6.0, m).tangential == doctest::Approx(2.0 * r.tangential));
}

TEST_CASE("hybrid control") {
    const ControllerGains g;
    ContactState l, f;
    SUBCASE("equilibrium") {
        l.position = f.position = {3.0, -1.0};
        l.velocity = f.velocity = {0.2, 0.1};
        l.force = {4.0, 2.0};
        f.force = {-4.0, -2.0};
        CHECK(hybrid_control(l, f, g) == Axes2{});
    }
    SUBCASE("position error") {
        l.position.normal = 1.0;
        CHECK(hybrid_control(l, f, g).normal == doctest::Approx(180.0));
        CHECK(hybrid_control(l, f, g).tangential == 0.0);
    }
    SUBCASE("force term") {
        l.force.normal = 2.0;
        f.force.normal = 2.0;
        CHECK(hybrid_control(l, f, g).normal == doctest::Approx(2.0));
    }
    SUBCASE("velocity error") {
        l.velocity.tangential = 0.5;
        CHECK(hybrid_control(l, f, g).tangential == doctest::Approx(30.0));
    }
}

TEST_CASE("density to resistance coefficient") {
    CHECK(material_from_density(30, 340).k_r == doctest::Approx(340));
    CHECK(material_from_density(60, 340).k_r == doctest::Approx(680));
    CHECK(material_from_density(45, 340).k_r == doctest::Approx(510));
    CHECK(material_from_density(45, 340).density == 45);
    CHECK_THROWS_AS(material_from_density(0, 340), SimError);
    CHECK_THROWS_AS(material_from_density(101, 340), SimError);
    CHECK_THROWS_AS(material_from_density(30, -1), SimError);
}

TEST_CASE("force limit is inclusive") {
    GrindSimState st;
    st.follower.force.tangential = -4.0;
    CHECK(check_force_limit(st, 9.0));
    st.follower.force.tangential = -9.0;
    CHECK(check_force_limit(st, 9.0));
    st.follower.force.tangential = 9.01;
    CHECK_FALSE(check_force_limit(st, 9.0));
    CHECK_THROWS_AS(check_force_limit(st, 0.0), SimError);
}

TEST_CASE("step validates its inputs") {
    auto st = box_sim();
    CHECK_THROWS_AS(step(st, leader_at(0), 0.0), SimError);
    CHECK_THROWS_AS(step(st, leader_at(0), -1e-3), SimError);
    CHECK_THROWS_AS(step(st, leader_at(std::nan("")), 1e-3), SimError);
}

TEST_CASE("free motion away from the belt") {
    auto st = box_sim();
    const auto n0 = st.workpiece.size();
    for (int i = 0; i < 500; ++i) {
        st = step(st, leader_at(-2.0), 1e-3);
        CHECK(st.removal_rate == 0.0);
        CHECK(st.follower.force == Axes2{});
    }
    CHECK(st.workpiece.size() == n0);
    CHECK(st.follower.position.normal < -0.5);
}

TEST_CASE("velocity decays under pure damping") {
    auto st = box_sim();
    st.follower.position.normal = -3.0;
    st.follower.velocity.normal = -5.0;
    double prev = std::abs(st.follower.velocity.normal);
    for (int i = 0; i < 300; ++i) {
        // leader sits on the follower with zero velocity, so only the damping terms act
        st = step(st, leader_at(st.follower.position.normal), 1e-3);
        const double v = std::abs(st.follower.velocity.normal);
        CHECK(v < prev);
        prev = v;
    }
    CHECK(st.removed_volume == 0.0);
}

TEST_CASE("steady feed reaches the analytic resistance") {
    for (double cell : {0.5, 0.0}) {
        auto st = box_sim(0.5, cell);
        const double feed = 0.2;  // mm/s
        const double dt = 1e-3;
        double sum = 0.0;
        int count = 0;
        for (int i = 1; i <= 10000; ++i) {
            step_in_place(st, leader_at(feed * i * dt, feed), dt);
            // 5 s at 0.2 mm/s is exactly two 0.5 mm sample layers
            if (i > 5000) {
                sum += -st.follower.force.normal;
                ++count;
            }
        }
        const double expected = st.material.k_r * feed * 100.0 / st.material.belt_speed;
        CHECK(sum / count == doctest::Approx(expected).epsilon(0.05));
        CHECK(st.follower.force.tangential == doctest::Approx(0.5 * st.follower.force.normal));
    }
}

TEST_CASE("material conservation and retreat") {
    auto st = box_sim();
    const double v0 = st.workpiece.volume();
    double integrated = 0.0;
    std::size_t prev = st.workpiece.size();
    const double dt = 1e-3;
    for (int i = 1; i <= 3000; ++i) {
        step_in_place(st, leader_at(0.5 * i * dt, 0.5), dt);
        integrated += st.removal_rate * dt;
        CHECK(st.workpiece.size() <= prev);
        prev = st.workpiece.size();
    }
    CHECK(st.removed_volume > 0.5);
    CHECK(std::abs(st.removed_volume - integrated) < 1e-9);
    // partly removed cells stay in the cloud until fully gone
    CHECK(st.workpiece.volume() >= v0 - st.removed_volume - 1e-9);
    CHECK(st.workpiece.volume() < v0);

    const double removed = st.removed_volume;
    for (int i = 0; i < 1000; ++i) step_in_place(st, leader_at(-3.0), dt);
    for (int i = 0; i < 500; ++i) {
        step_in_place(st, leader_at(-3.0), dt);
        CHECK(st.removal_rate == 0.0);
    }
    CHECK(st.removed_volume - removed < 0.05 * removed);
}

TEST_CASE("step is deterministic and time advances") {
    auto a = box_sim();
    auto b = box_sim();
    for (int i = 1; i <= 800; ++i) {
        a = step(a, leader_at(1e-3 * i, 1.0), 1e-3);
        b = step(b, leader_at(1e-3 * i, 1.0), 1e-3);
    }
    CHECK(a.follower.position == b.follower.position);
    CHECK(a.follower.force == b.follower.force);
    CHECK(a.workpiece.size() == b.workpiece.size());
    CHECK(a.time == doctest::Approx(0.8));
}

TEST_CASE("positioning at contact") {
    auto st = box_sim();
    position_at_contact(st, {0.0, 0.0, -3.0});
    // the highest material is at x = 0, above the requested surface
    CHECK(surface_from_state(st.follower, st.mount).offset == doctest::Approx(0.0));
    CHECK(st.follower.velocity == Axes2{});
    position_at_contact(st, {0.0, 0.0, 2.0});
    CHECK(surface_from_state(st.follower, st.mount).offset == doctest::Approx(2.0));
    CHECK(material_top(st, {}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(position_at_contact(st, {3.0, 0.0, 0.0}), GeometryError);
}

TEST_CASE("sim log csv") {
    auto st = box_sim();
    st = step(st, leader_at(0.1), 1e-3);
    std::ostringstream out;
    write_sim_log(out, {log_row(st)});
    const auto s = out.str();
    CHECK(s.rfind("time,x_N,x_T,v_N,v_T,F_N,F_T,V_t,points_remaining\n", 0) == 0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 2);
}
