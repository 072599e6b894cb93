#include "decompgrind/orchestrator.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <memory>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

namespace decompgrind {

std::string_view to_string(MethodVariant m) {
    switch (m) {
        case MethodVariant::Proposed: return "Proposed";
        case MethodVariant::RandHyb: return "Rand-Hyb";
        case MethodVariant::CspHyb: return "CSP-Hyb";
        case MethodVariant::DemoSpeed1: return "Demo-Speed-1";
        case MethodVariant::DemoSpeed2: return "Demo-Speed-2";
        case MethodVariant::BcilFull: return "BCIL-full";
    }
    return "Proposed";
}

std::vector<MethodVariant> all_methods() {
    return {MethodVariant::Proposed,   MethodVariant::RandHyb,    MethodVariant::CspHyb,
            MethodVariant::DemoSpeed1, MethodVariant::DemoSpeed2, MethodVariant::BcilFull};
}

MethodVariant parse_method(std::string_view name) {
    for (auto m : all_methods()) {
        if (to_string(m) == name) return m;
    }
    throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

void RunConfig::validate() const {
    if (planner.horizon < 1 || planner.theta_grid.empty() || planner.psi_grid.empty()) {
        throw std::invalid_argument("planner needs a horizon >= 1 and non-empty angle grids");
    }
    if (!(x_step > 0.0)) throw std::invalid_argument("x step must be positive");
    if (!(observation_time >= 0.0)) throw std::invalid_argument("observation time must be >= 0");
    if (observation_stride < 1) throw std::invalid_argument("observation stride must be >= 1");
    if (max_cycles < 1 || !(max_time > 0.0)) throw std::invalid_argument("cycle and time caps must be positive");
    if (!(convergence_fraction >= 0.0)) throw std::invalid_argument("convergence fraction must be >= 0");
    if (!(hybrid_duration > 0.0) || !(hybrid_feed > 0.0) || !(hybrid_cap > 0.0)) {
        throw std::invalid_argument("hybrid duration, feed and cap must be positive");
    }
    if (surface_budget < 0) throw std::invalid_argument("surface budget must be >= 0");
    grind.validate();
}

RunConfig default_run_config() {
    RunConfig cfg;
    const auto grid = default_planner_config(PointCloud({Point3::Zero()}));
    cfg.planner.theta_grid = grid.theta_grid;
    cfg.planner.psi_grid = grid.psi_grid;
    cfg.planner.horizon = grid.horizon;
    cfg.planner.k_c = grid.k_c;
    return cfg;
}

namespace {

struct RunError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

MaterialModel material_for(const WorkpieceSpec& spec, const RunConfig& cfg) {
    return material_from_density(spec.density, cfg.base_k_r, cfg.lambda, cfg.belt_speed);
}

double period(const RunConfig& cfg) { return 1.0 / cfg.grind.control_rate; }

/// Execution clock and bookkeeping shared by every method.
class Session {
public:
    Session(const WorkpieceSpec& spec, const RunConfig& cfg, std::uint64_t seed, std::string_view method)
        : cfg_(cfg), gw_(gen_workpiece(spec, seed)) {
        cfg.validate();
        SimParams params = cfg.sim;
        params.cell_size = gw_.cell_size;
        sim_ = make_sim(gw_.initial, material_for(spec, cfg), cfg.mount, params);
        target_obs_ = observe(gw_.target, gw_.cell_size, cfg.observation_stride);
        planner_ = cfg.planner;
        report_.method = std::string(method);
        report_.workpiece = spec.name;
        report_.seed = seed;
    }

    GrindSimState& sim() { return sim_; }
    const GeneratedWorkpiece& workpiece() const { return gw_; }
    const PointCloud& target() const { return target_obs_; }
    RunReport& report() { return report_; }
    double clock() const { return clock_; }

    PointCloud observe_now() {
        clock_ += cfg_.observation_time;
        report_.observation_time += cfg_.observation_time;
        ++report_.observations;
        PointCloud obs = observe(sim_.workpiece, gw_.cell_size, cfg_.observation_stride);
        if (obs.empty()) throw RunError("observed shape is empty");
        report_.trace.push_back({clock_, chamfer(obs, target_obs_)});
        return obs;
    }

    CuttingSurface plan_step(const PointCloud& shape) {
        const auto t0 = std::chrono::steady_clock::now();
        fit_x_grid(planner_, shape, cfg_.x_step);
        const CuttingSurface s = next_surface(shape, target_obs_, planner_);
        const double measured = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        charge_planning(cfg_.planning_time >= 0.0 ? cfg_.planning_time : measured);
        return s;
    }

    void charge_planning(double seconds) {
        clock_ += seconds;
        report_.planning_time += seconds;
        ++report_.planning_steps;
    }

    GrindOutcome grind(LeaderSource& leader, const CuttingSurface& surface, const GrindOptions& opts) {
        position_at_contact(sim_, surface);
        const double sim_t0 = sim_.time, clock_t0 = clock_;
        GrindOutcome o = grind_with(leader, sim_, surface, opts);
        clock_ += o.elapsed;
        report_.grinding_time += o.elapsed;
        report_.substeps += o.substeps;
        report_.in_limit_substeps += o.in_limit_substeps;
        ++report_.surfaces_ground;
        report_.surfaces.push_back(surface);
        if (o.aborted_force_limit()) ++report_.aborts;
        for (auto row : o.force_trace) {
            row.time = clock_t0 + (row.time - sim_t0);
            report_.force_log.push_back(row);
        }
        return o;
    }

    RunReport finish(std::string termination) {
        report_.termination = std::move(termination);
        report_.execution_time = clock_;
        report_.in_limit_ratio = report_.substeps ? static_cast<double>(report_.in_limit_substeps) /
                                                        static_cast<double>(report_.substeps)
                                                  : 1.0;
        report_.final_shape = observe(sim_.workpiece, gw_.cell_size, cfg_.observation_stride);
        if (!report_.trace.empty()) {
            report_.initial_error = report_.trace.front().error;
            report_.final_error = report_.trace.back().error;
        } else {
            report_.initial_error = chamfer(observe(gw_.initial, gw_.cell_size, cfg_.observation_stride), target_obs_);
            report_.final_error = report_.final_shape.empty() ? 0.0 : chamfer(report_.final_shape, target_obs_);
        }
        return std::move(report_);
    }

private:
    const RunConfig& cfg_;
    GeneratedWorkpiece gw_;
    GrindSimState sim_;
    PointCloud target_obs_;
    PlannerConfig planner_;
    RunReport report_;
    double clock_ = 0.0;
};

/// Error has dropped at least once (or started at zero) and the last change is small.
bool converged(const std::vector<ErrorSample>& trace, double fraction) {
    if (trace.size() < 2) return false;
    const double e0 = trace.front().error;
    bool decreased = e0 == 0.0;
    for (std::size_t k = 1; k < trace.size(); ++k) decreased = decreased || trace[k].error < trace[k - 1].error;
    const double change = std::abs(trace.back().error - trace[trace.size() - 2].error);
    return decreased && change <= fraction * e0;
}

CuttingSurface random_surface(const PointCloud& shape, const PlannerConfig& grid, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick_theta(0, grid.theta_grid.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_psi(0, grid.psi_grid.size() - 1);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        CuttingSurface s{grid.theta_grid[pick_theta(rng)], grid.psi_grid[pick_psi(rng)], 0.0};
        const Point3 n = s.normal();
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& p : shape.points()) {
            lo = std::min(lo, n.dot(p));
            hi = std::max(hi, n.dot(p));
        }
        s.offset = std::uniform_real_distribution<double>(lo, hi)(rng);
        if (!split(shape, s).next_shape.empty()) return s;
    }
    throw RunError("could not draw a random surface that keeps material");
}

struct LeaderPlan {
    std::unique_ptr<LeaderSource> leader;
    GrindOptions options;
};

LeaderPlan leader_for(MethodVariant m, const RunConfig& cfg, const MethodResources& res) {
    LeaderPlan p;
    p.options = cfg.grind;
    switch (m) {
        case MethodVariant::Proposed:
            if (!res.policy) throw std::invalid_argument("Proposed needs a trained policy");
            p.leader = std::make_unique<PolicyLeader>(*res.policy, period(cfg));
            break;
        case MethodVariant::BcilFull:
            if (!res.bcil_policy) throw std::invalid_argument("BCIL-full needs its own trained policy");
            p.leader = std::make_unique<PolicyLeader>(*res.bcil_policy, period(cfg));
            p.options.timeout = cfg.hybrid_duration;
            break;
        case MethodVariant::DemoSpeed1:
        case MethodVariant::DemoSpeed2: {
            const double feed = m == MethodVariant::DemoSpeed1 ? res.demo_feed_1 : res.demo_feed_2;
            if (!(feed > 0.0)) throw std::invalid_argument(std::string(to_string(m)) + " needs a positive demo feed");
            p.leader = std::make_unique<ConstantFeedLeader>(feed);
            break;
        }
        case MethodVariant::RandHyb:
        case MethodVariant::CspHyb:
            p.leader = std::make_unique<CappedFeedLeader>(cfg.hybrid_feed, cfg.hybrid_cap);
            p.options.timeout = cfg.hybrid_duration;
            break;
    }
    return p;
}

}  // namespace

RunReport run_baseline(MethodVariant method, const WorkpieceSpec& spec, const RunConfig& cfg,
                       const MethodResources& res, std::uint64_t seed) {
    Session session(spec, cfg, seed, to_string(method));
    LeaderPlan lp = leader_for(method, cfg, res);
    std::mt19937_64 rng(seed ^ 0x5eedULL);
    const bool planned = method != MethodVariant::BcilFull;
    const int steps_per_cycle = cfg.planner.replan_observation_period > 0 ? cfg.planner.replan_observation_period : 2;
    // BCIL-full has no target; the base top is the fixture's physical stop.
    const CuttingSurface base_top{0.0, 0.0, spec.base.height};

    session.observe_now();
    PointCloud shape = observe(session.sim().workpiece, session.workpiece().cell_size, cfg.observation_stride);
    for (int cycle = 0; cycle < cfg.max_cycles; ++cycle) {
        if (session.clock() >= cfg.max_time) return session.finish("timeout");
        for (int step = 0; step < (planned ? steps_per_cycle : 1); ++step) {
            if (method == MethodVariant::RandHyb && cfg.surface_budget > 0 &&
                session.report().planning_steps >= cfg.surface_budget) {
                break;
            }
            CuttingSurface surface = base_top;
            if (method == MethodVariant::RandHyb) {
                surface = random_surface(shape, cfg.planner, rng);
                session.charge_planning(0.0);
            } else if (planned) {
                surface = session.plan_step(shape);
            }
            SplitResult predicted = split(shape, surface);
            if (planned && predicted.removal_shape.empty()) continue;
            const GrindOutcome o = session.grind(*lp.leader, surface, lp.options);
            if (o.aborted_force_limit()) break;  // restart from observation
            if (!predicted.next_shape.empty()) shape = std::move(predicted.next_shape);
        }
        shape = session.observe_now();
        if (converged(session.report().trace, cfg.convergence_fraction)) return session.finish("converged");
        if (method == MethodVariant::RandHyb && cfg.surface_budget > 0 &&
            session.report().planning_steps >= cfg.surface_budget) {
            return session.finish("budget");
        }
    }
    return session.finish("timeout");
}

RunReport run_decompgrind(const WorkpieceSpec& spec, const RunConfig& cfg, const PolicyModel& model,
                          std::uint64_t seed) {
    MethodResources res;
    res.policy = &model;
    return run_baseline(MethodVariant::Proposed, spec, cfg, res, seed);
}

RunReport run_single_removal(MethodVariant method, const WorkpieceSpec& spec, const RunConfig& cfg,
                             const MethodResources& res, std::uint64_t seed) {
    Session session(spec, cfg, seed, to_string(method));
    LeaderPlan lp = leader_for(method, cfg, res);
    const GrindOutcome o = session.grind(*lp.leader, session.workpiece().interface, lp.options);
    return session.finish(std::string(to_string(o.termination)));
}

std::vector<Episode> record_segmented_demonstrations(const WorkpieceSpec& spec, const RunConfig& run_cfg,
                                                     const DemoConfig& demo_cfg, int repetitions,
                                                     std::uint64_t seed) {
    if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
    std::vector<Episode> out;
    for (int r = 0; r < repetitions; ++r) {
        const std::uint64_t rep_seed = seed + static_cast<std::uint64_t>(r);
        Session session(spec, run_cfg, rep_seed, "expert");
        PointCloud shape = session.observe_now();
        for (int cycle = 0; cycle < run_cfg.max_cycles; ++cycle) {
            bool ground = false;
            for (int step = 0; step < run_cfg.planner.replan_observation_period; ++step) {
                const CuttingSurface surface = session.plan_step(shape);
                SplitResult predicted = split(shape, surface);
                if (predicted.removal_shape.empty()) continue;
                position_at_contact(session.sim(), surface);
                out.push_back(record_episode(session.sim(), surface, demo_cfg, spec.name,
                                             (rep_seed << 16) + out.size()));
                ground = true;
                shape = std::move(predicted.next_shape);
            }
            if (!ground) break;
            // same stopping rule as a run, so the residue trims after convergence are not recorded
            shape = session.observe_now();
            if (converged(session.report().trace, run_cfg.convergence_fraction)) break;
        }
    }
    return out;
}

std::vector<Episode> record_full_demonstrations(const WorkpieceSpec& spec, const RunConfig& run_cfg,
                                                const DemoConfig& demo_cfg, int repetitions, std::uint64_t seed) {
    if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
    std::vector<Episode> out;
    const CuttingSurface base_top{0.0, 0.0, spec.base.height};
    for (int r = 0; r < repetitions; ++r) {
        const std::uint64_t rep_seed = seed + static_cast<std::uint64_t>(r);
        Session session(spec, run_cfg, rep_seed, "expert");
        position_at_contact(session.sim(), base_top);
        out.push_back(record_episode(session.sim(), base_top, demo_cfg, spec.name, rep_seed << 16));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Metrics

double error_threshold(double initial_error, double final_error, double fraction) {
    return fraction * (initial_error - final_error);
}

double time_to_threshold(const RunReport& report, double threshold) {
    for (const auto& s : report.trace) {
        if (s.error <= threshold) return s.time;
    }
    return std::numeric_limits<double>::infinity();
}

Stat mean_std(const std::vector<double>& v) {
    Stat s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.stdev = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

Summary summarize(const std::vector<RunReport>& reports, std::optional<double> threshold) {
    Summary s;
    if (reports.empty()) return s;
    s.method = reports.front().method;
    s.workpiece = reports.front().workpiece;
    s.runs = reports.size();
    std::vector<double> exec, grind, err, ratio, ttt;
    for (const auto& r : reports) {
        exec.push_back(r.execution_time);
        grind.push_back(r.grinding_time);
        err.push_back(r.final_error);
        ratio.push_back(r.in_limit_ratio);
        if (r.in_limit_ratio < 1.0) ++s.aborted_runs;
        const double thr = threshold ? *threshold : error_threshold(r.initial_error, r.final_error);
        ttt.push_back(time_to_threshold(r, thr));
    }
    s.execution_time = mean_std(exec);
    s.grinding_time = mean_std(grind);
    s.final_error = mean_std(err);
    s.in_limit_ratio = mean_std(ratio);
    s.time_to_threshold = mean_std(ttt);
    return s;
}

std::string report_json(const RunReport& r, int indent) {
    using nlohmann::json;
    auto finite_or_null = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
    json j;
    j["method"] = r.method;
    j["workpiece"] = r.workpiece;
    j["seed"] = r.seed;
    j["termination"] = r.termination;
    j["execution_time"] = r.execution_time;
    j["grinding_time"] = r.grinding_time;
    j["observation_time"] = r.observation_time;
    j["planning_time"] = r.planning_time;
    j["in_limit_ratio"] = r.in_limit_ratio;
    j["substeps"] = r.substeps;
    j["in_limit_substeps"] = r.in_limit_substeps;
    j["observations"] = r.observations;
    j["planning_steps"] = r.planning_steps;
    j["surfaces_ground"] = r.surfaces_ground;
    j["aborts"] = r.aborts;
    j["initial_error"] = finite_or_null(r.initial_error);
    j["final_error"] = finite_or_null(r.final_error);
    j["final_points"] = r.final_shape.size();
    json trace = json::array();
    for (const auto& e : r.trace) trace.push_back({{"time", e.time}, {"error", e.error}});
    j["trace"] = trace;
    json surfaces = json::array();
    for (const auto& s : r.surfaces) surfaces.push_back({{"theta", s.theta}, {"psi", s.psi}, {"x", s.offset}});
    j["surfaces"] = surfaces;
    return j.dump(indent);
}

void write_error_trace_csv(std::ostream& out, const RunReport& r) {
    out << "time,error\n" << std::setprecision(10);
    for (const auto& e : r.trace) out << e.time << ',' << e.error << '\n';
}

void write_summary_csv(std::ostream& out, const std::vector<Summary>& rows) {
    out << "method,workpiece,runs,execution_time_mean,execution_time_std,grinding_time_mean,grinding_time_std,"
           "final_error_mean,final_error_std,in_limit_ratio_mean,in_limit_ratio_std,time_to_threshold_mean,"
           "time_to_threshold_std,aborted_runs\n"
        << std::setprecision(10);
    for (const auto& s : rows) {
        out << s.method << ',' << s.workpiece << ',' << s.runs << ',' << s.execution_time.mean << ','
            << s.execution_time.stdev << ',' << s.grinding_time.mean << ',' << s.grinding_time.stdev << ','
            << s.final_error.mean << ',' << s.final_error.stdev << ',' << s.in_limit_ratio.mean << ','
            << s.in_limit_ratio.stdev << ',' << s.time_to_threshold.mean << ',' << s.time_to_threshold.stdev << ','
            << s.aborted_runs << '\n';
    }
}

}  // namespace decompgrind
