#pragma once

#include "decompgrind/demo_expert.hpp"
#include "decompgrind/orchestrator.hpp"
#include "decompgrind/policy.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace decompgrind {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BenchConfig {
    std::vector<MethodVariant> methods{MethodVariant::Proposed, MethodVariant::DemoSpeed1, MethodVariant::DemoSpeed2};
    std::vector<std::string> workpieces{"WP-S1", "WP-S2", "WP-S3", "WP-S4", "WP-S5"};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    int jobs = 0;  // worker threads; 0 uses the hardware concurrency
};

/// Everything the CLI can set from a file.
struct AppConfig {
    RunConfig run;
    DemoConfig demo;
    int repetitions = 5;
    std::uint64_t demo_seed = 1;
    std::vector<std::string> demo_workpieces{"WP-T1", "WP-T2"};
    ModelConfig model;
    TrainConfig train;
    int window = 20;
    double train_rate = 20.0;  // Hz
    bool pad_start = true;
    BenchConfig bench;
};

AppConfig default_app_config();

/// INI text with the sections [sim], [planner], [policy], [expert] and
/// [bench]. Keys left out keep their defaults; unknown sections or keys and
/// malformed values throw ConfigError.
AppConfig parse_config(std::istream& in);
AppConfig load_config(const std::string& path);

/// Writes every key with its current value; parse_config() reads it back.
void write_config(std::ostream& out, const AppConfig& cfg);

}  // namespace decompgrind
