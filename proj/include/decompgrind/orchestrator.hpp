#pragma once

#include "decompgrind/demo_expert.hpp"
#include "decompgrind/planner.hpp"
#include "decompgrind/policy.hpp"
#include "decompgrind/workpiece.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace decompgrind {

enum class MethodVariant { Proposed, RandHyb, CspHyb, DemoSpeed1, DemoSpeed2, BcilFull };

std::string_view to_string(MethodVariant m);
/// Accepts the printed names ("Proposed", "Rand-Hyb", ...). Throws std::invalid_argument.
MethodVariant parse_method(std::string_view name);
std::vector<MethodVariant> all_methods();

struct RunConfig {
    // Angle grids, horizon and k_c; the x grid is refitted to every observed shape.
    PlannerConfig planner;
    double x_step = 1.0;  // mm

    SimParams sim;
    MountConfig mount;
    double base_k_r = 340.0;
    double lambda = 0.5;
    double belt_speed = 10000.0;
    GrindOptions grind;

    double observation_time = 50.5;  // s charged per observation
    int observation_stride = 2;      // lattice subsampling of observed clouds
    // Seconds charged per planning step; negative charges the measured compute time.
    double planning_time = -1.0;

    int max_cycles = 40;
    double max_time = 7200.0;  // s of simulated execution time
    double convergence_fraction = 0.05;

    // Force-capped feed used by the fixed-duration hybrid baselines.
    double hybrid_duration = 10.0;  // s
    double hybrid_feed = 0.5;       // mm/s
    double hybrid_cap = 8.0;        // N

    // Surfaces Rand-Hyb may grind; 0 leaves only the cycle and time caps.
    int surface_budget = 0;

    void validate() const;
};

/// Planner grids of +/-30 deg in 10 deg steps, horizon 2.
RunConfig default_run_config();

/// Trained models and recorded feeds a method may need.
struct MethodResources {
    const PolicyModel* policy = nullptr;       // Proposed
    const PolicyModel* bcil_policy = nullptr;  // BCIL-full
    double demo_feed_1 = 0.0;                  // mean expert feed on WP-T1 (mm/s)
    double demo_feed_2 = 0.0;                  // mean expert feed on WP-T2 (mm/s)
};

struct ErrorSample {
    double time = 0.0;   // s of execution time at the observation
    double error = 0.0;  // chamfer to the target (mm^2)
};

struct RunReport {
    std::string method;
    std::string workpiece;
    std::uint64_t seed = 0;
    std::string termination;  // converged, timeout, budget (Rand-Hyb), or a GrindTermination name

    std::vector<ErrorSample> trace;  // one entry per observation
    double execution_time = 0.0;
    double grinding_time = 0.0;
    double observation_time = 0.0;
    double planning_time = 0.0;

    double in_limit_ratio = 1.0;
    std::size_t substeps = 0;
    std::size_t in_limit_substeps = 0;

    int observations = 0;
    int planning_steps = 0;
    int surfaces_ground = 0;
    int aborts = 0;
    std::vector<CuttingSurface> surfaces;

    double initial_error = 0.0;
    double final_error = 0.0;
    PointCloud final_shape;

    // Follower log at the control rate, times on the execution clock.
    std::vector<SimLogRow> force_log;
};

/// Observe, plan two surfaces, grind each with the learned policy, observe
/// again; until the error has dropped once and then changes by at most the
/// convergence fraction of the initial error between two observations.
RunReport run_decompgrind(const WorkpieceSpec& spec, const RunConfig& cfg, const PolicyModel& model,
                          std::uint64_t seed);

/// Any method through the same observation/planning loop. Proposed and
/// Demo-Speed-k grind each planned surface to completion; CSP-Hyb and
/// Rand-Hyb run the force-capped feed for a fixed duration per surface;
/// BCIL-full grinds flat from first contact with its own policy, for the same
/// fixed duration, without a planner.
RunReport run_baseline(MethodVariant method, const WorkpieceSpec& spec, const RunConfig& cfg,
                       const MethodResources& res, std::uint64_t seed);

/// Single removal from first contact down to the interface at zero tilt (the
/// WP-S and WP-T protocol). No observation or planning is charged.
RunReport run_single_removal(MethodVariant method, const WorkpieceSpec& spec, const RunConfig& cfg,
                             const MethodResources& res, std::uint64_t seed);

/// Expert episodes over the removal shapes a GCSP run would grind on `spec`:
/// the expert grinds every planned surface in turn from first contact, one
/// episode per surface, each capped at the demonstration duration.
std::vector<Episode> record_segmented_demonstrations(const WorkpieceSpec& spec, const RunConfig& run_cfg,
                                                     const DemoConfig& demo_cfg, int repetitions,
                                                     std::uint64_t seed);

/// Expert episodes grinding `spec` flat from first contact, each as long as a
/// regular demonstration (the continuous-demonstration baseline's data).
std::vector<Episode> record_full_demonstrations(const WorkpieceSpec& spec, const RunConfig& run_cfg,
                                                const DemoConfig& demo_cfg, int repetitions, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Metrics

/// 20 % of the difference between the initial and the final shape error.
double error_threshold(double initial_error, double final_error, double fraction = 0.2);

/// First trace time whose error is at or below the threshold; +inf if never.
double time_to_threshold(const RunReport& report, double threshold);

struct Stat {
    double mean = 0.0;
    double stdev = 0.0;  // sample standard deviation; 0 for a single value
};

Stat mean_std(const std::vector<double>& values);

struct Summary {
    std::string method;
    std::string workpiece;
    std::size_t runs = 0;
    Stat execution_time, grinding_time, final_error, in_limit_ratio, time_to_threshold;
    std::size_t aborted_runs = 0;  // runs with in_limit_ratio < 1
};

/// Aggregate repeated runs of one (method, workpiece) cell. The time to
/// threshold uses `threshold` when given; runs that never reach it count as +inf.
Summary summarize(const std::vector<RunReport>& reports, std::optional<double> threshold = std::nullopt);

// RunReport as JSON (the final shape is omitted) and CSV traces.
std::string report_json(const RunReport& r, int indent = 2);
void write_error_trace_csv(std::ostream& out, const RunReport& r);
void write_summary_csv(std::ostream& out, const std::vector<Summary>& rows);

}  // namespace decompgrind
