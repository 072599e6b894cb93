// Command-line front end: workpiece generation, demonstrations, training,
// planning, single runs and benchmark sweeps.

#include "decompgrind/config.hpp"
#include "decompgrind/orchestrator.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace decompgrind;

namespace {

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
}

AppConfig config_from(const std::string& path) { return path.empty() ? default_app_config() : load_config(path); }

bool single_removal(const WorkpieceSpec& spec) {
    return spec.family == WorkpieceFamily::T || spec.family == WorkpieceFamily::S;
}

void write_run(const fs::path& prefix, const RunReport& r) {
    open_out(prefix.string() + ".json") << report_json(r) << '\n';
    auto trace = open_out(prefix.string() + "_error.csv");
    write_error_trace_csv(trace, r);
    auto force = open_out(prefix.string() + "_force.csv");
    write_sim_log(force, r.force_log);
}

std::pair<double, double> demo_feeds(const AppConfig& cfg) {
    DemoConfig demo = cfg.demo;
    const auto t1 = record_demonstrations({named_workpiece("WP-T1")}, cfg.repetitions, demo, cfg.demo_seed);
    const auto t2 = record_demonstrations({named_workpiece("WP-T2")}, cfg.repetitions, demo, cfg.demo_seed + 1000);
    return {mean_feed(t1), mean_feed(t2)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decomposed planning and learned force adaptation for robotic rough grinding"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("-c,--config", config_path, "INI configuration file")->check(CLI::ExistingFile);

    // config
    auto* cmd_config = app.add_subcommand("config", "Print the effective configuration");

    // gen-workpiece
    auto* cmd_gen = app.add_subcommand("gen-workpiece", "Sample a named workpiece into point clouds");
    std::string wp_name = "WP-E1", initial_path = "initial.xyz", target_path = "target.xyz";
    std::uint64_t seed = 1;
    cmd_gen->add_option("-w,--workpiece", wp_name, "Workpiece name")->capture_default_str();
    cmd_gen->add_option("-s,--seed", seed, "Sampling seed")->capture_default_str();
    cmd_gen->add_option("--initial", initial_path, "Output cloud of the initial shape")->capture_default_str();
    cmd_gen->add_option("--target", target_path, "Output cloud of the target shape")->capture_default_str();

    // demo
    auto* cmd_demo = app.add_subcommand("demo", "Record expert demonstrations and build the training dataset");
    std::string demo_dir = "demos";
    cmd_demo->add_option("-o,--out-dir", demo_dir, "Output directory")->capture_default_str();

    // train
    auto* cmd_train = app.add_subcommand("train", "Train the force-adaptation policy on a dataset");
    std::string dataset_path, model_path = "policy.txt";
    cmd_train->add_option("-d,--dataset", dataset_path, "Dataset file from `demo`")->required()->check(CLI::ExistingFile);
    cmd_train->add_option("-o,--out", model_path, "Model output file")->capture_default_str();

    // plan
    auto* cmd_plan = app.add_subcommand("plan", "Plan cutting surfaces for a shape");
    std::string current_path;
    cmd_plan->add_option("--current", current_path, "Current shape cloud")->required()->check(CLI::ExistingFile);
    cmd_plan->add_option("--target", target_path, "Target shape cloud")->required()->check(CLI::ExistingFile);

    // grind
    auto* cmd_grind = app.add_subcommand("grind", "Run one method on one workpiece");
    std::string method_name = "Proposed", bcil_path, out_prefix = "run";
    double feed1 = 0.0, feed2 = 0.0;
    cmd_grind->add_option("-w,--workpiece", wp_name, "Workpiece name")->capture_default_str();
    cmd_grind->add_option("-m,--method", method_name, "Method name")->capture_default_str();
    cmd_grind->add_option("--model", model_path, "Trained policy (Proposed)");
    cmd_grind->add_option("--bcil-model", bcil_path, "Trained policy (BCIL-full)");
    cmd_grind->add_option("--feed1", feed1, "Demo-Speed-1 feed in mm/s (default: from demonstrations)");
    cmd_grind->add_option("--feed2", feed2, "Demo-Speed-2 feed in mm/s (default: from demonstrations)");
    cmd_grind->add_option("-s,--seed", seed, "Workpiece seed")->capture_default_str();
    cmd_grind->add_option("-o,--out", out_prefix, "Output prefix for report and traces")->capture_default_str();

    // bench
    auto* cmd_bench = app.add_subcommand("bench", "Run the configured method x workpiece x seed grid");
    std::string bench_dir = "bench";
    cmd_bench->add_option("--model", model_path, "Trained policy (Proposed)");
    cmd_bench->add_option("--bcil-model", bcil_path, "Trained policy (BCIL-full)");
    cmd_bench->add_option("-o,--out-dir", bench_dir, "Output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const AppConfig cfg = config_from(config_path);

        if (*cmd_config) {
            write_config(std::cout, cfg);
        } else if (*cmd_gen) {
            const auto gw = gen_workpiece(named_workpiece(wp_name), seed);
            write_point_cloud(initial_path, gw.initial);
            write_point_cloud(target_path, gw.target);
            std::cout << wp_name << ": " << gw.initial.size() << " initial points, " << gw.target.size()
                      << " target points, point volume " << gw.initial.point_volume() << " mm^3\n";
        } else if (*cmd_demo) {
            std::vector<WorkpieceSpec> specs;
            for (const auto& n : cfg.demo_workpieces) specs.push_back(named_workpiece(n));
            const auto episodes = record_demonstrations(specs, cfg.repetitions, cfg.demo, cfg.demo_seed);
            for (std::size_t i = 0; i < episodes.size(); ++i) {
                std::ostringstream name;
                name << "episode_" << std::setw(2) << std::setfill('0') << i << '_' << episodes[i].workpiece << ".csv";
                auto out = open_out(fs::path(demo_dir) / name.str());
                write_episode_csv(out, episodes[i]);
            }
            std::vector<std::string> skipped;
            const auto ds = build_dataset(episodes, cfg.window, cfg.train_rate, &skipped, cfg.pad_start);
            auto out = open_out(fs::path(demo_dir) / "dataset.txt");
            write_dataset(out, ds);
            std::cout << episodes.size() << " episodes, " << ds.windows.size() << " windows";
            if (!skipped.empty()) std::cout << ", " << skipped.size() << " episodes too short";
            std::cout << '\n';
            for (const auto& n : cfg.demo_workpieces) {
                std::vector<Episode> of;
                for (const auto& e : episodes) {
                    if (e.workpiece == n) of.push_back(e);
                }
                std::cout << "mean feed " << n << ": " << mean_feed(of) << " mm/s\n";
            }
        } else if (*cmd_train) {
            std::ifstream in(dataset_path);
            const Dataset ds = read_dataset(in);
            const PolicyModel m = train(ds, cfg.model, cfg.train);
            save_model(model_path, m);
            std::cout << "trained on " << ds.windows.size() << " windows: loss " << m.initial_loss << " -> "
                      << m.loss_history.back() << '\n';
        } else if (*cmd_plan) {
            const PointCloud current = read_point_cloud(current_path);
            const PointCloud target = read_point_cloud(target_path);
            PlannerConfig pc = cfg.run.planner;
            fit_x_grid(pc, current, cfg.run.x_step);
            const PlanResult r = plan(current, target, pc);
            std::cout << "step,theta_deg,psi_deg,x_mm,cost\n";
            for (std::size_t h = 0; h < r.surfaces.size(); ++h) {
                const auto& s = r.surfaces[h];
                std::cout << h << ',' << s.theta * 180 / std::numbers::pi << ',' << s.psi * 180 / std::numbers::pi
                          << ',' << s.offset << ',' << r.per_step_cost[h] << '\n';
            }
            std::cout << "objective " << r.objective << '\n';
        } else if (*cmd_grind) {
            const auto method = parse_method(method_name);
            const auto spec = named_workpiece(wp_name);
            MethodResources res;
            PolicyModel model, bcil;
            if (method == MethodVariant::Proposed) {
                model = load_model(model_path);
                res.policy = &model;
            }
            if (method == MethodVariant::BcilFull) {
                if (bcil_path.empty()) throw std::runtime_error("BCIL-full needs --bcil-model");
                bcil = load_model(bcil_path);
                res.bcil_policy = &bcil;
            }
            if ((method == MethodVariant::DemoSpeed1 && feed1 <= 0.0) || (method == MethodVariant::DemoSpeed2 && feed2 <= 0.0)) {
                const auto [f1, f2] = demo_feeds(cfg);
                if (feed1 <= 0.0) feed1 = f1;
                if (feed2 <= 0.0) feed2 = f2;
            }
            res.demo_feed_1 = feed1;
            res.demo_feed_2 = feed2;
            const RunReport r = single_removal(spec) ? run_single_removal(method, spec, cfg.run, res, seed)
                                                     : run_baseline(method, spec, cfg.run, res, seed);
            write_run(out_prefix, r);
            std::cout << r.method << " on " << r.workpiece << ": " << r.termination << ", execution "
                      << r.execution_time << " s, grinding " << r.grinding_time << " s, in-limit "
                      << r.in_limit_ratio << ", error " << r.initial_error << " -> " << r.final_error << '\n';
        } else if (*cmd_bench) {
            MethodResources res;
            PolicyModel model, bcil;
            auto uses = [&](MethodVariant m) {
                return std::find(cfg.bench.methods.begin(), cfg.bench.methods.end(), m) != cfg.bench.methods.end();
            };
            if (uses(MethodVariant::Proposed)) {
                model = load_model(model_path);
                res.policy = &model;
            }
            if (uses(MethodVariant::BcilFull)) {
                if (bcil_path.empty()) throw std::runtime_error("BCIL-full needs --bcil-model");
                bcil = load_model(bcil_path);
                res.bcil_policy = &bcil;
            }
            if (uses(MethodVariant::DemoSpeed1) || uses(MethodVariant::DemoSpeed2)) {
                std::tie(res.demo_feed_1, res.demo_feed_2) = demo_feeds(cfg);
            }
            struct Cell {
                MethodVariant method;
                std::string workpiece;
                std::uint64_t seed;
            };
            std::vector<Cell> cells;
            for (auto m : cfg.bench.methods) {
                for (const auto& w : cfg.bench.workpieces) {
                    named_workpiece(w);  // fail early on a bad name
                    for (auto s : cfg.bench.seeds) cells.push_back({m, w, s});
                }
            }
            std::vector<RunReport> reports(cells.size());
            std::atomic<std::size_t> next{0};
            std::mutex io;
            std::exception_ptr failure;
            auto worker = [&] {
                for (std::size_t i; (i = next++) < cells.size();) {
                    try {
                        const auto spec = named_workpiece(cells[i].workpiece);
                        reports[i] = single_removal(spec) ? run_single_removal(cells[i].method, spec, cfg.run, res, cells[i].seed)
                                                          : run_baseline(cells[i].method, spec, cfg.run, res, cells[i].seed);
                        std::lock_guard lock(io);
                        std::cout << reports[i].method << ' ' << reports[i].workpiece << " seed " << reports[i].seed
                                  << ": " << reports[i].termination << ", " << reports[i].execution_time << " s\n"
                                  << std::flush;
                    } catch (...) {
                        std::lock_guard lock(io);
                        if (!failure) failure = std::current_exception();
                    }
                }
            };
            const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
            const unsigned jobs = cfg.bench.jobs > 0 ? static_cast<unsigned>(cfg.bench.jobs) : hw;
            std::vector<std::thread> pool;
            for (unsigned k = 0; k < std::min<std::size_t>(jobs, cells.size()); ++k) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
            if (failure) std::rethrow_exception(failure);

            std::map<std::pair<std::string, std::string>, std::vector<RunReport>> grouped;
            for (std::size_t i = 0; i < cells.size(); ++i) {
                write_run(fs::path(bench_dir) / (reports[i].method + "_" + reports[i].workpiece + "_seed" +
                                                 std::to_string(reports[i].seed)),
                          reports[i]);
                grouped[{reports[i].method, reports[i].workpiece}].push_back(std::move(reports[i]));
            }
            std::vector<Summary> rows;
            for (const auto& [key, runs] : grouped) rows.push_back(summarize(runs));
            auto out = open_out(fs::path(bench_dir) / "summary.csv");
            write_summary_csv(out, rows);
            write_summary_csv(std::cout, rows);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
