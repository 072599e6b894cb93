#pragma once

#include "decompgrind/contact_state.hpp"
#include "decompgrind/geometry.hpp"

#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace decompgrind {

struct SimError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Removal-resistance parameters of one workpiece material.
struct MaterialModel {
    double k_r = 340.0;          // N s / mm^3 scaled
    double lambda = 0.5;         // F_T / F_N
    double belt_speed = 10000.0; // S_g, mm/s
    double density = 30.0;       // infill percent

    void validate() const;
};

/// Linear hardness emulation with 30 % infill as the reference density.
MaterialModel material_from_density(double density_percent, double base_k_r, double lambda = 0.5,
                                    double belt_speed = 10000.0);

/// Per-axis gains of the hybrid position/force controller.
struct ControllerGains {
    Axes2 kp{360.0, 360.0};
    Axes2 kd{120.0, 120.0};
    Axes2 kf{1.0, 1.0};
    Axes2 j{1.0, 1.0};

    void validate() const;
};

struct SimParams {
    Axes2 mass{1.0, 1.0};
    Axes2 damping{50.0, 50.0};
    ControllerGains gains;
    // Lattice spacing of the workpiece samples (mm). A positive value turns on
    // fractional removal of each sample's lattice cell; zero falls back to
    // deleting samples as they cross the belt plane.
    double cell_size = 0.0;

    void validate() const;
};

struct Resistance {
    double normal = 0.0;      // F_N, N
    double tangential = 0.0;  // F_T, N
};

/// F_N = k_r V_t / S_g and F_T = lambda F_N.
Resistance resistance(double removal_rate, const MaterialModel& material);

/// u = J/2 [K_p (x_l - x_f) + K_d (v_l - v_f)] + K_f/2 (F_l + F_f), per axis.
Axes2 hybrid_control(const ContactState& leader, const ContactState& follower, const ControllerGains& gains);

/// Follower robot holding the workpiece against the belt.
///
/// The workpiece cloud is reordered internally (sorted along the current
/// contact normal); the point order carries no meaning.
struct GrindSimState {
    ContactState follower;
    PointCloud workpiece;
    MaterialModel material;
    MountConfig mount;
    SimParams params;
    double time = 0.0;
    double removal_rate = 0.0;    // V_t, mm^3/s over the last step
    double removed_volume = 0.0;  // cumulative, mm^3

    // Removal bookkeeping for the current orientation. cell_low[i] is the lowest
    // key n.p over sample i's lattice cell, fraction[i] how much of that cell is
    // gone. Both are aligned with workpiece and sorted by cell_low.
    struct Cache {
        bool valid = false;
        Tilt orientation;
        double cell_width = 0.0;  // extent of one cell along the normal
        std::vector<double> cell_low;
        std::vector<double> fraction;
    } cache;
};

GrindSimState make_sim(PointCloud workpiece, const MaterialModel& material, const MountConfig& mount,
                       const SimParams& params, const ContactState& follower = {});

/// One fixed step. Throws SimError when dt <= 0 or the leader is non-finite.
GrindSimState step(GrindSimState state, const ContactState& leader, double dt);

/// Same as step() but updates in place; the grinding loops use this.
void step_in_place(GrindSimState& state, const ContactState& leader, double dt);

/// |F_T| <= limit (inclusive). Throws SimError when limit <= 0.
bool check_force_limit(const GrindSimState& state, double limit);

/// Reorient the follower and place it so the belt just touches the highest
/// remaining material along the new normal, or the given surface if that lies
/// higher. Velocity and force are reset.
void position_at_contact(GrindSimState& state, const CuttingSurface& surface);

/// Highest extent of the remaining material along the normal of `tilt` (mm).
double material_top(const GrindSimState& state, const Tilt& tilt);

struct SimLogRow {
    double time, x_n, x_t, v_n, v_t, f_n, f_t, removal_rate;
    std::size_t points_remaining;
};

SimLogRow log_row(const GrindSimState& state);

/// CSV with header time,x_N,x_T,v_N,v_T,F_N,F_T,V_t,points_remaining. Forces
/// are logged as resistance magnitudes.
void write_sim_log(std::ostream& out, const std::vector<SimLogRow>& rows);

}  // namespace decompgrind
