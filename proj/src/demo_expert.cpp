#include "decompgrind/demo_expert.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <random>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace decompgrind {

void ExpertGains::validate() const {
    if (!(target_force > 0.0)) throw std::invalid_argument("expert target force must be positive");
    if (!(kp >= 0.0) || !(ki >= 0.0) || !(force_tau >= 0.0) || !(max_rate > 0.0)) {
        throw std::invalid_argument("expert gains must be non-negative and the rate limit positive");
    }
    if (!(min_offset > 0.0) || !(initial_offset >= min_offset) || !(max_offset >= initial_offset)) {
        throw std::invalid_argument("expert offsets must satisfy 0 < min <= initial <= max");
    }
}

ContactState expert_leader(const ContactState& follower, double target_force, const ExpertGains& g,
                           ExpertState& st, double dt) {
    if (!(target_force > 0.0)) throw std::invalid_argument("target force must be positive");
    if (!st.started) {
        st.log_lead = std::log(g.initial_offset);
        st.offset = g.initial_offset;
        st.started = true;
    }
    st.perceived_force += (std::abs(follower.force.tangential) - st.perceived_force) * dt / (g.force_tau + dt);
    const double error = target_force - st.perceived_force;
    st.log_lead = std::clamp(st.log_lead + g.ki * error / target_force * dt, std::log(g.min_offset),
                             std::log(g.max_offset));
    const double wanted = std::clamp(std::exp(st.log_lead) + g.kp * error, g.min_offset, g.max_offset);
    const double max_change = g.max_rate * dt;
    const double change = std::clamp(wanted - st.offset, -max_change, max_change);
    st.offset += change;

    ContactState leader;
    leader.role = Role::Leader;
    leader.orientation = follower.orientation;
    leader.position = {follower.position.normal + st.offset, follower.position.tangential};
    leader.velocity = {follower.velocity.normal + change / dt, follower.velocity.tangential};
    leader.force = -follower.force;
    return leader;
}

void Episode::validate() const {
    if (!(rate_hz > 0.0)) throw std::invalid_argument("episode rate must be positive");
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (!(samples[i].time > samples[i - 1].time)) throw std::invalid_argument("episode timestamps must increase");
    }
}

double Episode::duration() const { return samples.empty() ? 0.0 : samples.back().time - samples.front().time; }

Episode record_episode(GrindSimState& sim, const CuttingSurface& stop, const DemoConfig& cfg,
                       const std::string& name, std::uint64_t noise_seed) {
    cfg.expert.validate();
    if (!(cfg.perturb_sigma >= 0.0) || !(cfg.perturb_tau > 0.0) || !(cfg.perturb_guard > 0.0)) {
        throw std::invalid_argument("perturbation sigma must be >= 0, tau and guard positive");
    }
    Episode ep;
    ep.workpiece = name;
    ep.rate_hz = 1.0 / cfg.dt;
    ExpertState es;
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> gauss;
    const double decay = std::exp(-cfg.dt / cfg.perturb_tau);
    const double kick = cfg.perturb_sigma * std::sqrt(1.0 - decay * decay);
    double eta = 0.0;
    const auto steps = static_cast<long>(std::llround(cfg.duration / cfg.dt));
    for (long k = 0;; ++k) {
        const ContactState leader = expert_leader(sim.follower, cfg.expert.target_force, cfg.expert, es, cfg.dt);
        ep.samples.push_back({static_cast<double>(k) * cfg.dt, sim.follower, leader});
        const bool reached = surface_from_state(sim.follower, sim.mount).offset <= stop.offset;
        if (k >= steps || reached || sim.workpiece.empty()) break;
        ContactState executed = leader;
        if (cfg.perturb_sigma > 0.0) {
            eta = decay * eta + kick * gauss(rng);
            // a demonstrator backs off near the limit instead of pressing on
            if (std::abs(sim.follower.force.tangential) > cfg.perturb_guard * cfg.force_limit) eta = std::min(eta, 0.0);
            // only the lead is perturbed; differentiating the rough OU path
            // would put near-white noise on the velocity reference
            executed.position.normal = sim.follower.position.normal + es.offset * std::exp(eta);
        }
        step_in_place(sim, executed, cfg.dt);
    }
    return ep;
}

std::vector<Episode> record_demonstrations(const std::vector<WorkpieceSpec>& workpieces, int repetitions,
                                           const DemoConfig& cfg, std::uint64_t seed) {
    if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
    std::vector<Episode> out;
    for (std::size_t w = 0; w < workpieces.size(); ++w) {
        const auto& spec = workpieces[w];
        const MaterialModel material = material_from_density(spec.density, cfg.base_k_r, cfg.lambda, cfg.belt_speed);
        for (int r = 0; r < repetitions; ++r) {
            const auto gw = gen_workpiece(spec, seed + 1000 * w + static_cast<std::uint64_t>(r));
            SimParams params = cfg.sim;
            params.cell_size = gw.cell_size;
            GrindSimState sim = make_sim(gw.initial, material, cfg.mount, params);
            position_at_contact(sim, gw.interface);
            const std::uint64_t episode_seed = seed + 1000 * w + static_cast<std::uint64_t>(r);
            out.push_back(record_episode(sim, gw.interface, cfg, spec.name, episode_seed ^ 0x9e3779b97f4a7c15ULL));
        }
    }
    return out;
}

double mean_feed(const std::vector<Episode>& episodes) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& e : episodes) {
        for (const auto& s : e.samples) {
            sum += s.follower.velocity.normal;
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("no samples to average");
    return sum / static_cast<double>(count);
}

std::array<double, kStateDim> channels(const ContactState& s) {
    return {s.position.normal, s.position.tangential, s.velocity.normal,
            s.velocity.tangential, s.force.normal, s.force.tangential};
}

ContactState from_channels(const double* v, Role role) {
    ContactState s;
    s.position = {v[0], v[1]};
    s.velocity = {v[2], v[3]};
    s.force = {v[4], v[5]};
    s.role = role;
    return s;
}

Dataset build_dataset(const std::vector<Episode>& episodes, int n, double train_rate_hz,
                      std::vector<std::string>* skipped, bool pad_start) {
    if (n < 1) throw std::invalid_argument("window length must be >= 1");
    if (!(train_rate_hz > 0.0)) throw std::invalid_argument("training rate must be positive");
    Dataset d;
    d.n = n;
    d.rate_hz = train_rate_hz;
    for (const auto& e : episodes) {
        e.validate();
        const double ratio = e.rate_hz / train_rate_hz;
        const auto stride = static_cast<std::size_t>(std::llround(ratio));
        if (stride < 1 || std::abs(ratio - static_cast<double>(stride)) > 1e-9 * ratio) {
            throw std::invalid_argument("training rate must divide the episode rate");
        }
        std::vector<const EpisodeSample*> z;
        for (std::size_t i = 0; i < e.samples.size(); i += stride) z.push_back(&e.samples[i]);
        if (z.size() < static_cast<std::size_t>(n) + 1 && !(pad_start && z.size() >= 2)) {
            if (skipped) skipped->push_back(e.workpiece);
            continue;
        }
        if (pad_start) z.insert(z.begin(), static_cast<std::size_t>(n - 1), z.front());
        const auto T = z.size();
        // 0-based: window ends at t-1 for t = n..T-1, target is sample t
        for (std::size_t t = static_cast<std::size_t>(n); t < T; ++t) {
            Window w;
            w.follower.reserve(static_cast<std::size_t>(n));
            for (std::size_t k = t - static_cast<std::size_t>(n); k < t; ++k) w.follower.push_back(z[k]->follower);
            w.leader_next = z[t]->leader;
            d.windows.push_back(std::move(w));
        }
    }
    return d;
}

Dataset truncate_dataset(Dataset d, std::size_t count) {
    if (d.windows.size() > count) d.windows.resize(count);
    return d;
}

namespace {

void write_state(std::ostream& out, const ContactState& s) {
    for (double v : channels(s)) out << ',' << v;
}

std::vector<double> parse_numbers(const std::string& line, char sep) {
    std::vector<double> v;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, sep)) {
        if (tok.empty()) continue;
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(tok, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("malformed number '" + tok + "'");
        }
        v.push_back(x);
    }
    return v;
}

}  // namespace

void write_episode_csv(std::ostream& out, const Episode& e) {
    out << "time,fx_N,fx_T,fv_N,fv_T,fF_N,fF_T,lx_N,lx_T,lv_N,lv_T,lF_N,lF_T\n";
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& s : e.samples) {
        out << s.time;
        write_state(out, s.follower);
        write_state(out, s.leader);
        out << '\n';
    }
}

Episode read_episode_csv(std::istream& in, const std::string& name, double rate_hz) {
    Episode e;
    e.workpiece = name;
    e.rate_hz = rate_hz;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            if (line.rfind("time", 0) == 0) continue;
        }
        const auto v = parse_numbers(line, ',');
        if (v.size() != 1 + 2 * kStateDim) throw std::invalid_argument("episode row needs 13 columns");
        e.samples.push_back({v[0], from_channels(&v[1], Role::Follower), from_channels(&v[1 + kStateDim], Role::Leader)});
    }
    e.validate();
    return e;
}

void write_dataset(std::ostream& out, const Dataset& d) {
    out << "# n=" << d.n << " rate_hz=" << d.rate_hz << '\n';
    out << "# columns: n x (x_N x_T v_N v_T F_N F_T) follower, oldest first, then the next leader state\n";
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& w : d.windows) {
        bool first = true;
        auto put = [&](const ContactState& s) {
            for (double v : channels(s)) {
                if (!first) out << ' ';
                out << v;
                first = false;
            }
        };
        for (const auto& f : w.follower) put(f);
        put(w.leader_next);
        out << '\n';
    }
}

Dataset read_dataset(std::istream& in) {
    Dataset d;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string tok;
            while (ss >> tok) {
                if (tok.rfind("n=", 0) == 0) d.n = std::stoi(tok.substr(2));
                if (tok.rfind("rate_hz=", 0) == 0) d.rate_hz = std::stod(tok.substr(8));
            }
            continue;
        }
        if (d.n < 1) throw std::invalid_argument("dataset header with n= is missing");
        const auto v = parse_numbers(line, ' ');
        if (v.size() != static_cast<std::size_t>(kStateDim) * (d.n + 1)) {
            throw std::invalid_argument("dataset row has the wrong number of values");
        }
        Window w;
        for (int k = 0; k < d.n; ++k) w.follower.push_back(from_channels(&v[k * kStateDim], Role::Follower));
        w.leader_next = from_channels(&v[d.n * kStateDim], Role::Leader);
        d.windows.push_back(std::move(w));
    }
    return d;
}

}  // namespace decompgrind
