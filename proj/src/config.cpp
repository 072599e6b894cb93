#include "decompgrind/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <ostream>
#include <sstream>

namespace decompgrind {

AppConfig default_app_config() {
    AppConfig cfg;
    cfg.run = default_run_config();
    return cfg;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

double to_double(const std::string& s) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ConfigError("expected a number, got '" + s + "'");
    }
    return v;
}

long long to_integer(const std::string& s) {
    long long v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw ConfigError("expected an integer, got '" + s + "'");
    return v;
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("expected a boolean, got '" + s + "'");
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return {};
    return s.substr(a, s.find_last_not_of(" \t") - a + 1);
}

std::vector<std::string> to_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F f) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + f(v[i]);
    return out;
}

constexpr double kDeg = std::numbers::pi / 180.0;

std::vector<double> to_radians(const std::string& s) {
    std::vector<double> out;
    for (const auto& tok : to_list(s)) out.push_back(to_double(tok) * kDeg);
    if (out.empty()) throw ConfigError("angle grid must not be empty");
    return out;
}

std::string degrees(const std::vector<double>& v) {
    return join(v, [](double r) { return fmt(std::round(r / kDeg * 1e9) / 1e9); });
}

std::string search_name(PlannerSearch s) {
    switch (s) {
        case PlannerSearch::Auto: return "auto";
        case PlannerSearch::Greedy: return "greedy";
        case PlannerSearch::Exhaustive: return "exhaustive";
    }
    return "auto";
}

PlannerSearch to_search(const std::string& s) {
    if (s == "auto") return PlannerSearch::Auto;
    if (s == "greedy") return PlannerSearch::Greedy;
    if (s == "exhaustive") return PlannerSearch::Exhaustive;
    throw ConfigError("search must be auto, greedy or exhaustive, got '" + s + "'");
}

struct Field {
    const char* section;
    const char* key;
    std::function<std::string(const AppConfig&)> get;
    std::function<void(AppConfig&, const std::string&)> set;
};

#define DG_DOUBLE(sec, name, expr)                                                       \
    Field{sec, name, [](const AppConfig& c) { return fmt(c.expr); },                    \
          [](AppConfig& c, const std::string& v) { c.expr = to_double(v); }}
#define DG_INT(sec, name, expr)                                                          \
    Field{sec, name, [](const AppConfig& c) { return std::to_string(c.expr); },         \
          [](AppConfig& c, const std::string& v) {                                      \
              c.expr = static_cast<decltype(c.expr)>(to_integer(v));                     \
          }}
#define DG_BOOL(sec, name, expr)                                                         \
    Field{sec, name, [](const AppConfig& c) { return std::string(c.expr ? "true" : "false"); }, \
          [](AppConfig& c, const std::string& v) { c.expr = to_bool(v); }}
#define DG_AXES(sec, name, expr)                                                         \
    Field{sec, name, [](const AppConfig& c) { return fmt(c.expr.normal); },             \
          [](AppConfig& c, const std::string& v) { c.expr.normal = c.expr.tangential = to_double(v); }}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        // [sim] plant, controller and the grinding loop
        DG_AXES("sim", "mass", run.sim.mass),
        DG_AXES("sim", "damping", run.sim.damping),
        DG_AXES("sim", "kp", run.sim.gains.kp),
        DG_AXES("sim", "kd", run.sim.gains.kd),
        DG_AXES("sim", "kf", run.sim.gains.kf),
        DG_AXES("sim", "j", run.sim.gains.j),
        DG_DOUBLE("sim", "base_k_r", run.base_k_r),
        DG_DOUBLE("sim", "lambda", run.lambda),
        DG_DOUBLE("sim", "belt_speed", run.belt_speed),
        DG_DOUBLE("sim", "dt", run.grind.dt),
        DG_DOUBLE("sim", "control_rate", run.grind.control_rate),
        DG_DOUBLE("sim", "force_limit", run.grind.force_limit),
        DG_DOUBLE("sim", "eps", run.grind.eps),
        DG_INT("sim", "persistence", run.grind.persistence),
        DG_DOUBLE("sim", "timeout", run.grind.timeout),
        Field{"sim", "max_tilt_deg", [](const AppConfig& c) { return fmt(c.run.mount.max_tilt / kDeg); },
              [](AppConfig& c, const std::string& v) { c.run.mount.max_tilt = to_double(v) * kDeg; }},
        // [planner]
        DG_INT("planner", "horizon", run.planner.horizon),
        DG_DOUBLE("planner", "k_c", run.planner.k_c),
        DG_DOUBLE("planner", "x_step", run.x_step),
        Field{"planner", "theta_deg", [](const AppConfig& c) { return degrees(c.run.planner.theta_grid); },
              [](AppConfig& c, const std::string& v) { c.run.planner.theta_grid = to_radians(v); }},
        Field{"planner", "psi_deg", [](const AppConfig& c) { return degrees(c.run.planner.psi_grid); },
              [](AppConfig& c, const std::string& v) { c.run.planner.psi_grid = to_radians(v); }},
        Field{"planner", "search", [](const AppConfig& c) { return search_name(c.run.planner.search); },
              [](AppConfig& c, const std::string& v) { c.run.planner.search = to_search(v); }},
        DG_DOUBLE("planner", "exhaustive_budget", run.planner.exhaustive_budget),
        DG_INT("planner", "steps_per_observation", run.planner.replan_observation_period),
        DG_DOUBLE("planner", "observation_time", run.observation_time),
        DG_INT("planner", "observation_stride", run.observation_stride),
        DG_DOUBLE("planner", "planning_time", run.planning_time),
        DG_INT("planner", "max_cycles", run.max_cycles),
        DG_DOUBLE("planner", "max_time", run.max_time),
        DG_DOUBLE("planner", "convergence_fraction", run.convergence_fraction),
        // [policy]
        DG_INT("policy", "window", window),
        DG_DOUBLE("policy", "train_rate", train_rate),
        DG_BOOL("policy", "pad_start", pad_start),
        DG_INT("policy", "layers", model.layers),
        DG_INT("policy", "hidden", model.hidden),
        DG_BOOL("policy", "relative_positions", model.relative_positions),
        DG_BOOL("policy", "compress", model.compress),
        DG_INT("policy", "epochs", train.epochs),
        DG_DOUBLE("policy", "learning_rate", train.learning_rate),
        DG_INT("policy", "batch_size", train.batch_size),
        DG_INT("policy", "seed", train.seed),
        // [expert]
        DG_DOUBLE("expert", "target_force", demo.expert.target_force),
        DG_DOUBLE("expert", "kp", demo.expert.kp),
        DG_DOUBLE("expert", "ki", demo.expert.ki),
        DG_DOUBLE("expert", "initial_offset", demo.expert.initial_offset),
        DG_DOUBLE("expert", "min_offset", demo.expert.min_offset),
        DG_DOUBLE("expert", "max_offset", demo.expert.max_offset),
        DG_DOUBLE("expert", "max_rate", demo.expert.max_rate),
        DG_DOUBLE("expert", "force_tau", demo.expert.force_tau),
        DG_DOUBLE("expert", "duration", demo.duration),
        DG_DOUBLE("expert", "perturb_sigma", demo.perturb_sigma),
        DG_DOUBLE("expert", "perturb_tau", demo.perturb_tau),
        DG_INT("expert", "repetitions", repetitions),
        DG_INT("expert", "seed", demo_seed),
        Field{"expert", "workpieces", [](const AppConfig& c) { return join(c.demo_workpieces, [](const std::string& s) { return s; }); },
              [](AppConfig& c, const std::string& v) { c.demo_workpieces = to_list(v); }},
        // [bench]
        Field{"bench", "methods",
              [](const AppConfig& c) { return join(c.bench.methods, [](MethodVariant m) { return std::string(to_string(m)); }); },
              [](AppConfig& c, const std::string& v) {
                  c.bench.methods.clear();
                  for (const auto& tok : to_list(v)) {
                      try {
                          c.bench.methods.push_back(parse_method(tok));
                      } catch (const std::invalid_argument& e) {
                          throw ConfigError(e.what());
                      }
                  }
              }},
        Field{"bench", "workpieces", [](const AppConfig& c) { return join(c.bench.workpieces, [](const std::string& s) { return s; }); },
              [](AppConfig& c, const std::string& v) { c.bench.workpieces = to_list(v); }},
        Field{"bench", "seeds",
              [](const AppConfig& c) { return join(c.bench.seeds, [](std::uint64_t s) { return std::to_string(s); }); },
              [](AppConfig& c, const std::string& v) {
                  c.bench.seeds.clear();
                  for (const auto& tok : to_list(v)) c.bench.seeds.push_back(static_cast<std::uint64_t>(to_integer(tok)));
              }},
        DG_INT("bench", "jobs", bench.jobs),
        DG_DOUBLE("bench", "hybrid_duration", run.hybrid_duration),
        DG_DOUBLE("bench", "hybrid_feed", run.hybrid_feed),
        DG_DOUBLE("bench", "hybrid_cap", run.hybrid_cap),
        DG_INT("bench", "surface_budget", run.surface_budget),
    };
    return f;
}

#undef DG_DOUBLE
#undef DG_INT
#undef DG_BOOL
#undef DG_AXES

/// The demonstrations run in the same cell as the grinding.
void sync_demo(AppConfig& c) {
    c.demo.sim = c.run.sim;
    c.demo.mount = c.run.mount;
    c.demo.base_k_r = c.run.base_k_r;
    c.demo.lambda = c.run.lambda;
    c.demo.belt_speed = c.run.belt_speed;
    c.demo.dt = c.run.grind.dt;
    c.demo.force_limit = c.run.grind.force_limit;
}

void check(const AppConfig& c) {
    try {
        c.run.validate();
        c.demo.expert.validate();
        c.train.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (c.window < 1) throw ConfigError("window must be >= 1");
    if (!(c.train_rate > 0.0)) throw ConfigError("train_rate must be positive");
    if (c.repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (c.model.layers < 1 || c.model.hidden < 1) throw ConfigError("layers and hidden must be >= 1");
    if (c.bench.jobs < 0) throw ConfigError("jobs must be >= 0");
    if (!(c.demo.duration > 0.0)) throw ConfigError("duration must be positive");
}

}  // namespace

AppConfig parse_config(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.message() + " at line " + std::to_string(e.line()));
    }
    AppConfig cfg = default_app_config();
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) throw ConfigError("config: key '" + section + "' outside a section");
        for (const auto& [key, value] : body) {
            const Field* field = nullptr;
            for (const auto& f : fields()) {
                if (section == f.section && key == f.key) field = &f;
            }
            if (!field) throw ConfigError("config: unknown key [" + section + "] " + key);
            try {
                field->set(cfg, trim(value.data()));
            } catch (const ConfigError& e) {
                throw ConfigError("config: [" + section + "] " + key + ": " + e.what());
            }
        }
    }
    sync_demo(cfg);
    check(cfg);
    return cfg;
}

AppConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    return parse_config(in);
}

void write_config(std::ostream& out, const AppConfig& cfg) {
    std::string section;
    for (const auto& f : fields()) {
        if (section != f.section) {
            out << (section.empty() ? "" : "\n") << '[' << f.section << "]\n";
            section = f.section;
        }
        out << f.key << " = " << f.get(cfg) << '\n';
    }
}

}  // namespace decompgrind
