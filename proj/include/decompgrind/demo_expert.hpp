#pragma once

#include "decompgrind/grind_sim.hpp"
#include "decompgrind/workpiece.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace decompgrind {

/// PI regulator on the tangential-force error, acting on how far the leader
/// leads the follower along the normal. The integral part acts on the log of
/// the lead, so the loop gain does not depend on the material stiffness.
struct ExpertGains {
    double target_force = 4.0;    // N
    double kp = 0.0;              // mm/N
    double ki = 10.0;             // 1/s, relative lead change per unit relative force error
    double initial_offset = 0.05; // mm
    double min_offset = 1e-3;     // mm
    double max_offset = 3.0;      // mm
    double max_rate = 20.0;       // mm/s, bound on the offset change
    double force_tau = 0.02;      // s, low-pass on the perceived tangential force

    void validate() const;
};

struct ExpertState {
    double log_lead = 0.0;
    double offset = 0.0;
    double perceived_force = 0.0;
    bool started = false;
};

/// Leader command for the current follower state. The leader leads the
/// follower by the regulated offset along the normal and moves with it
/// (v_l = v_f + offset rate). Leader force is -F^f on both axes; the
/// tangential leader holds the follower's tangential position.
ContactState expert_leader(const ContactState& follower, double target_force, const ExpertGains& gains,
                           ExpertState& state, double dt);

struct EpisodeSample {
    double time = 0.0;
    ContactState follower;
    ContactState leader;
};

struct Episode {
    std::string workpiece;
    double rate_hz = 1000.0;
    std::vector<EpisodeSample> samples;

    /// Throws std::invalid_argument when timestamps are not increasing or the rate is not positive.
    void validate() const;
    [[nodiscard]] double duration() const;
};

struct DemoConfig {
    SimParams sim;
    MountConfig mount;
    ExpertGains expert;
    double base_k_r = 340.0;
    double lambda = 0.5;
    double belt_speed = 10000.0;
    double duration = 6.0;  // s per episode
    double dt = 1e-3;
    double force_limit = 9.0;
    // The executed lead is the expert's times exp(eta), eta an Ornstein-Uhlenbeck
    // process; the recorded leader stays the expert's own command. Zero disables.
    // 0.5 spreads the demonstrations enough that the policy has seen
    // sudden load steps; smaller values leave WP-E2 shoulder overshoots.
    double perturb_sigma = 0.5;
    double perturb_tau = 0.3;  // s
    // Above this fraction of the force limit eta may only shrink the lead.
    double perturb_guard = 0.75;
};

/// One closed-loop demonstration from the current follower pose until the
/// contact surface reaches `stop` or the duration runs out. `sim` is advanced.
Episode record_episode(GrindSimState& sim, const CuttingSurface& stop, const DemoConfig& cfg,
                       const std::string& name, std::uint64_t noise_seed = 0);

/// `repetitions` episodes per workpiece, each on a freshly sampled copy
/// (seed + repetition index) ground flat from first contact down to the interface.
std::vector<Episode> record_demonstrations(const std::vector<WorkpieceSpec>& workpieces, int repetitions,
                                           const DemoConfig& cfg, std::uint64_t seed = 1);

/// Mean follower normal velocity over a set of episodes (mm/s).
double mean_feed(const std::vector<Episode>& episodes);

/// Six channels per state: x_N x_T v_N v_T F_N F_T.
inline constexpr int kStateDim = 6;

struct Window {
    std::vector<ContactState> follower;  // n consecutive follower states, oldest first
    ContactState leader_next;            // leader state one sample after the window
};

struct Dataset {
    int n = 0;
    double rate_hz = 0.0;
    std::vector<Window> windows;
};

/// Decimates each episode to `train_rate_hz` and emits every window
/// (z^f_{t-n+1..t}, z^l_{t+1}), t = n..T-1 (1-based), i.e. T - n per episode.
/// Episodes with fewer than n + 1 samples are skipped and named in `skipped`.
///
/// With `pad_start`, each decimated episode is first extended backwards by
/// n - 1 copies of its first sample, the same history a policy sees when it
/// starts from rest; this adds n - 1 windows per episode.
Dataset build_dataset(const std::vector<Episode>& episodes, int n, double train_rate_hz,
                      std::vector<std::string>* skipped = nullptr, bool pad_start = false);

/// Keeps the first `count` windows (or all if fewer).
Dataset truncate_dataset(Dataset d, std::size_t count);

// Episode CSV columns: time, then x_N x_T v_N v_T F_N F_T for follower and for leader.
void write_episode_csv(std::ostream& out, const Episode& e);
Episode read_episode_csv(std::istream& in, const std::string& name = "", double rate_hz = 1000.0);

// Dataset text: "# n=<n> rate_hz=<r>" header, then one window per line with the
// n follower states (oldest first) followed by the leader state, six channels each.
void write_dataset(std::ostream& out, const Dataset& d);
Dataset read_dataset(std::istream& in);

std::array<double, kStateDim> channels(const ContactState& s);
ContactState from_channels(const double* v, Role role);

}  // namespace decompgrind
