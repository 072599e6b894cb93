#include "decompgrind/grind_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace decompgrind {

void MaterialModel::validate() const {
    if (!(k_r > 0.0) || !(lambda > 0.0) || !(belt_speed > 0.0) || !std::isfinite(k_r) || !std::isfinite(lambda) ||
        !std::isfinite(belt_speed)) {
        throw SimError("material needs positive finite k_r, lambda and belt speed");
    }
}

MaterialModel material_from_density(double density_percent, double base_k_r, double lambda, double belt_speed) {
    if (!(density_percent > 0.0) || density_percent > 100.0) throw SimError("density must lie in (0, 100]");
    MaterialModel m{base_k_r * density_percent / 30.0, lambda, belt_speed, density_percent};
    m.validate();
    return m;
}

namespace {

bool positive(Axes2 a) { return a.normal > 0.0 && a.tangential > 0.0 && a.finite(); }

}  // namespace

void ControllerGains::validate() const {
    if (!positive(kp) || !positive(kd) || !positive(kf) || !positive(j)) {
        throw SimError("controller gains must be positive");
    }
}

void SimParams::validate() const {
    if (!positive(mass)) throw SimError("mass must be positive");
    if (!(damping.normal >= 0.0) || !(damping.tangential >= 0.0)) throw SimError("damping must be non-negative");
    if (!(cell_size >= 0.0)) throw SimError("cell size must be non-negative");
    gains.validate();
}

Resistance resistance(double removal_rate, const MaterialModel& material) {
    const double fn = material.k_r * removal_rate / material.belt_speed;
    return {fn, material.lambda * fn};
}

Axes2 hybrid_control(const ContactState& leader, const ContactState& follower, const ControllerGains& g) {
    auto axis = [&](double Axes2::*a) {
        return 0.5 * (g.j.*a) * ((g.kp.*a) * (leader.position.*a - follower.position.*a) +
                                 (g.kd.*a) * (leader.velocity.*a - follower.velocity.*a)) +
               0.5 * (g.kf.*a) * (leader.force.*a + follower.force.*a);
    };
    return {axis(&Axes2::normal), axis(&Axes2::tangential)};
}

namespace {

Point3 normal_of(const Tilt& t) { return CuttingSurface{t.theta, t.psi, 0.0}.normal(); }

double cell_low_of(const Point3& p, const Point3& n, double s) {
    if (s <= 0.0) return n.dot(p);
    double low = 0.0;
    for (int j = 0; j < 3; ++j) low += n[j] * s * std::floor(p[j] / s) + s * std::min(n[j], 0.0);
    return low;
}

// Sort samples along the follower's current normal, carrying their removed fractions.
void rebuild_cache(GrindSimState& st) {
    auto& c = st.cache;
    const Point3 n = normal_of(st.follower.orientation);
    const double s = st.params.cell_size;
    const std::size_t count = st.workpiece.size();
    if (!c.valid || c.fraction.size() != count) c.fraction.assign(count, 0.0);

    std::vector<double> low(count);
    for (std::size_t i = 0; i < count; ++i) low[i] = cell_low_of(st.workpiece[i], n, s);
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return low[a] < low[b]; });

    auto& pts = st.workpiece.mutable_points();
    std::vector<Point3> sorted_pts(count);
    c.cell_low.resize(count);
    std::vector<double> sorted_fraction(count);
    for (std::size_t r = 0; r < count; ++r) {
        sorted_pts[r] = pts[order[r]];
        c.cell_low[r] = low[order[r]];
        sorted_fraction[r] = c.fraction[order[r]];
    }
    pts = std::move(sorted_pts);
    c.fraction = std::move(sorted_fraction);
    c.cell_width = s * (std::abs(n.x()) + std::abs(n.y()) + std::abs(n.z()));
    c.orientation = st.follower.orientation;
    c.valid = true;
}

// Remove material on the belt side of plane key = b; returns removed volume.
double remove_beyond(GrindSimState& st, double b) {
    auto& c = st.cache;
    auto& pts = st.workpiece.mutable_points();
    const double w = c.cell_width;
    double removed_fraction = 0.0;
    for (std::size_t r = pts.size(); r-- > 0;) {
        const double low = c.cell_low[r];
        double f;
        if (w > 0.0) {
            if (low + w <= b) break;
            f = std::min(1.0, (low + w - b) / w);
        } else {
            if (low <= b) break;
            f = 1.0;
        }
        if (f > c.fraction[r]) {
            removed_fraction += f - c.fraction[r];
            c.fraction[r] = f;
        }
    }
    while (!pts.empty() && c.fraction.back() >= 1.0) {
        pts.pop_back();
        c.fraction.pop_back();
        c.cell_low.pop_back();
    }
    return removed_fraction * st.workpiece.point_volume();
}

}  // namespace

GrindSimState make_sim(PointCloud workpiece, const MaterialModel& material, const MountConfig& mount,
                       const SimParams& params, const ContactState& follower) {
    material.validate();
    params.validate();
    GrindSimState st;
    st.follower = follower;
    st.follower.role = Role::Follower;
    st.workpiece = std::move(workpiece);
    st.material = material;
    st.mount = mount;
    st.params = params;
    return st;
}

void step_in_place(GrindSimState& st, const ContactState& leader, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw SimError("time step must be positive");
    if (!leader.finite()) throw SimError("leader state is not finite");

    auto& f = st.follower;
    const Axes2 u = hybrid_control(leader, f, st.params.gains);

    // normal axis: point mass with viscous damping, semi-implicit Euler
    const double acc = (u.normal + f.force.normal - st.params.damping.normal * f.velocity.normal) / st.params.mass.normal;
    f.velocity.normal += acc * dt;
    f.position.normal += f.velocity.normal * dt;
    // tangential axis follows the leader kinematically
    f.position.tangential = leader.position.tangential;
    f.velocity.tangential = leader.velocity.tangential;

    if (!st.cache.valid || !(st.cache.orientation == f.orientation)) rebuild_cache(st);
    const double b = surface_from_state(f, st.mount).offset;
    const double removed = remove_beyond(st, b);
    st.removal_rate = removed / dt;
    st.removed_volume += removed;

    const Resistance r = resistance(st.removal_rate, st.material);
    f.force = {-r.normal, -r.tangential};
    st.time += dt;
}

GrindSimState step(GrindSimState state, const ContactState& leader, double dt) {
    step_in_place(state, leader, dt);
    return state;
}

bool check_force_limit(const GrindSimState& state, double limit) {
    if (!(limit > 0.0)) throw SimError("force limit must be positive");
    return std::abs(state.follower.force.tangential) <= limit;
}

double material_top(const GrindSimState& st, const Tilt& tilt) {
    const Point3 n = normal_of(tilt);
    const double s = st.params.cell_size;
    const double w = s * (std::abs(n.x()) + std::abs(n.y()) + std::abs(n.z()));
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& p : st.workpiece.points()) top = std::max(top, cell_low_of(p, n, s) + w);
    return top;
}

void position_at_contact(GrindSimState& st, const CuttingSurface& surface) {
    surface.validate(st.mount.max_tilt);
    const Tilt tilt{surface.theta, surface.psi};
    const double top = st.workpiece.empty() ? surface.offset : material_top(st, tilt);
    CuttingSurface start = surface;
    start.offset = std::max(surface.offset, top);
    ContactState f = state_from_surface(start, st.mount);
    f.position.tangential = st.follower.position.tangential;
    st.follower = f;
    st.removal_rate = 0.0;
}

SimLogRow log_row(const GrindSimState& st) {
    const auto& f = st.follower;
    return {st.time,          f.position.normal, f.position.tangential, f.velocity.normal, f.velocity.tangential,
            -f.force.normal,  -f.force.tangential, st.removal_rate,      st.workpiece.size()};
}

void write_sim_log(std::ostream& out, const std::vector<SimLogRow>& rows) {
    out << "time,x_N,x_T,v_N,v_T,F_N,F_T,V_t,points_remaining\n";
    out.precision(10);
    for (const auto& r : rows) {
        out << r.time << ',' << r.x_n << ',' << r.x_t << ',' << r.v_n << ',' << r.v_t << ',' << r.f_n << ','
            << r.f_t << ',' << r.removal_rate << ',' << r.points_remaining << '\n';
    }
}

}  // namespace decompgrind
