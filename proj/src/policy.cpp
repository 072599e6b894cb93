#include "decompgrind/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace decompgrind {

using Eigen::MatrixXd;

void TrainConfig::validate() const {
    if (epochs < 1 || !(learning_rate > 0.0) || batch_size < 1) {
        throw PolicyError("epochs, learning rate and batch size must be positive");
    }
}

namespace {

std::array<double, kStateDim> input_row(const ContactState& s, const ContactState& newest, bool relative) {
    auto v = channels(s);
    if (relative) {
        v[0] -= newest.position.normal;
        v[1] -= newest.position.tangential;
    }
    return v;
}

std::array<double, kStateDim> output_row(const ContactState& leader, const ContactState& newest, bool relative) {
    return input_row(leader, newest, relative);
}

constexpr int kCompressedChannels = 4;  // positions and velocities

std::array<double, kStateDim> squash(std::array<double, kStateDim> v, const Normalizer& n, bool compress) {
    if (compress) {
        for (int c = 0; c < kCompressedChannels; ++c) v[c] = std::asinh(v[c] / n.scale[c]);
    }
    return v;
}

// T matrices of (kStateDim x B) for windows [first, first + count)
std::vector<MatrixXd> encode_inputs(const PolicyModel& m, const std::vector<const std::vector<ContactState>*>& ws) {
    const auto B = static_cast<Eigen::Index>(ws.size());
    std::vector<MatrixXd> seq(static_cast<std::size_t>(m.window), MatrixXd(kStateDim, B));
    for (Eigen::Index b = 0; b < B; ++b) {
        const auto& w = *ws[static_cast<std::size_t>(b)];
        const ContactState& newest = w.back();
        for (int t = 0; t < m.window; ++t) {
            const auto v = squash(input_row(w[static_cast<std::size_t>(t)], newest, m.config.relative_positions),
                                  m.input, m.config.compress);
            for (int c = 0; c < kStateDim; ++c) {
                seq[static_cast<std::size_t>(t)](c, b) = (v[c] - m.input.mean[c]) / m.input.stdev[c];
            }
        }
    }
    return seq;
}

MatrixXd encode_targets(const PolicyModel& m, const Dataset& d, const std::vector<std::size_t>& idx) {
    MatrixXd y(kStateDim, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t b = 0; b < idx.size(); ++b) {
        const auto& w = d.windows[idx[b]];
        const auto v = squash(output_row(w.leader_next, w.follower.back(), m.config.relative_positions), m.output,
                              m.config.compress);
        for (int c = 0; c < kStateDim; ++c) y(c, static_cast<Eigen::Index>(b)) = (v[c] - m.output.mean[c]) / m.output.stdev[c];
    }
    return y;
}

ContactState decode(const PolicyModel& m, const double* y, const ContactState& newest) {
    std::array<double, kStateDim> v{};
    for (int c = 0; c < kStateDim; ++c) {
        v[c] = y[c] * m.output.stdev[c] + m.output.mean[c];
        if (m.config.compress && c < kCompressedChannels) v[c] = m.output.scale[c] * std::sinh(v[c]);
    }
    if (m.config.relative_positions) {
        v[0] += newest.position.normal;
        v[1] += newest.position.tangential;
    }
    ContactState s = from_channels(v.data(), Role::Leader);
    s.orientation = newest.orientation;
    return s;
}

void finish_stats(std::array<double, kStateDim>& mean, std::array<double, kStateDim>& sq, std::array<double, kStateDim>& sd,
                  double count) {
    for (int c = 0; c < kStateDim; ++c) {
        mean[c] /= count;
        const double var = std::max(0.0, sq[c] / count - mean[c] * mean[c]);
        const double s = std::sqrt(var);
        // constant channels (e.g. the newest relative position) keep unit scale
        sd[c] = s > 1e-9 * (1.0 + std::abs(mean[c])) ? s : 1.0;
    }
}

void check_dataset(const Dataset& d) {
    if (d.windows.empty()) throw PolicyError("cannot train on an empty dataset");
    if (d.n < 1) throw PolicyError("dataset window length must be >= 1");
    for (const auto& w : d.windows) {
        if (w.follower.size() != static_cast<std::size_t>(d.n)) throw PolicyError("dataset windows differ in length");
    }
}

std::vector<const std::vector<ContactState>*> window_ptrs(const Dataset& d, const std::vector<std::size_t>& idx) {
    std::vector<const std::vector<ContactState>*> ws;
    ws.reserve(idx.size());
    for (auto i : idx) ws.push_back(&d.windows[i].follower);
    return ws;
}

}  // namespace

double dataset_loss(const PolicyModel& m, const Dataset& d) {
    check_dataset(d);
    double sum = 0.0;
    constexpr std::size_t chunk = 512;
    for (std::size_t first = 0; first < d.windows.size(); first += chunk) {
        std::vector<std::size_t> idx(std::min(chunk, d.windows.size() - first));
        std::iota(idx.begin(), idx.end(), first);
        const MatrixXd y = m.net.forward(encode_inputs(m, window_ptrs(d, idx)));
        sum += (y - encode_targets(m, d, idx)).squaredNorm();
    }
    return sum / static_cast<double>(d.windows.size() * kStateDim);
}

PolicyModel train(const Dataset& data, const ModelConfig& model_cfg, const TrainConfig& cfg) {
    check_dataset(data);
    cfg.validate();
    PolicyModel m;
    m.window = data.n;
    m.config = model_cfg;

    m.input.scale.fill(1.0);
    m.output.scale.fill(1.0);
    if (model_cfg.compress) {
        std::array<double, kStateDim> in_sq{}, out_sq{};
        for (const auto& w : data.windows) {
            for (const auto& s : w.follower) {
                const auto v = input_row(s, w.follower.back(), model_cfg.relative_positions);
                for (int c = 0; c < kStateDim; ++c) in_sq[c] += v[c] * v[c];
            }
            const auto v = output_row(w.leader_next, w.follower.back(), model_cfg.relative_positions);
            for (int c = 0; c < kStateDim; ++c) out_sq[c] += v[c] * v[c];
        }
        const double n_in = static_cast<double>(data.windows.size() * data.n);
        const double n_out = static_cast<double>(data.windows.size());
        for (int c = 0; c < kStateDim; ++c) {
            const double in_rms = std::sqrt(in_sq[c] / n_in), out_rms = std::sqrt(out_sq[c] / n_out);
            m.input.scale[c] = in_rms > 0.0 ? 0.1 * in_rms : 1.0;
            m.output.scale[c] = out_rms > 0.0 ? 0.1 * out_rms : 1.0;
        }
        // forces stay linear: they hover around the same target on every material
        for (int c = kCompressedChannels; c < kStateDim; ++c) m.input.scale[c] = m.output.scale[c] = 0.0;
    }

    std::array<double, kStateDim> in_sum{}, in_sq{}, out_sum{}, out_sq{};
    for (const auto& w : data.windows) {
        for (const auto& s : w.follower) {
            const auto v = squash(input_row(s, w.follower.back(), model_cfg.relative_positions), m.input, model_cfg.compress);
            for (int c = 0; c < kStateDim; ++c) {
                in_sum[c] += v[c];
                in_sq[c] += v[c] * v[c];
            }
        }
        const auto v = squash(output_row(w.leader_next, w.follower.back(), model_cfg.relative_positions), m.output,
                              model_cfg.compress);
        for (int c = 0; c < kStateDim; ++c) {
            out_sum[c] += v[c];
            out_sq[c] += v[c] * v[c];
        }
    }
    m.input.mean = in_sum;
    m.output.mean = out_sum;
    finish_stats(m.input.mean, in_sq, m.input.stdev, static_cast<double>(data.windows.size() * data.n));
    finish_stats(m.output.mean, out_sq, m.output.stdev, static_cast<double>(data.windows.size()));

    m.net = LstmRegressor(LstmShape{kStateDim, model_cfg.hidden, model_cfg.layers, kStateDim, true}, cfg.seed);
    m.initial_loss = dataset_loss(m, data);

    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(data.windows.size());
    std::iota(order.begin(), order.end(), 0);
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t first = 0; first < order.size(); first += batch) {
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(first),
                                               order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), first + batch)));
            const double loss = m.net.loss_and_gradient(encode_inputs(m, window_ptrs(data, idx)), encode_targets(m, data, idx));
            if (!std::isfinite(loss)) throw PolicyError("training loss became non-finite");
            m.net.adam_step(cfg.learning_rate);
        }
        const double loss = dataset_loss(m, data);
        if (!std::isfinite(loss)) throw PolicyError("training loss became non-finite");
        m.loss_history.push_back(loss);
    }
    return m;
}

ContactState predict(const PolicyModel& m, const std::vector<ContactState>& window) {
    if (!m.trained()) throw PolicyError("model is not trained");
    if (window.size() != static_cast<std::size_t>(m.window)) {
        throw PolicyError("window length " + std::to_string(window.size()) + " does not match the model's " +
                          std::to_string(m.window));
    }
    for (const auto& s : window) {
        if (!s.finite()) throw PolicyError("window holds a non-finite state");
    }
    const MatrixXd y = m.net.forward(encode_inputs(m, {&window}));
    return decode(m, y.data(), window.back());
}

std::vector<ContactState> predict_all(const PolicyModel& m, const Dataset& d) {
    check_dataset(d);
    if (d.n != m.window) throw PolicyError("dataset window length does not match the model");
    std::vector<std::size_t> idx(d.windows.size());
    std::iota(idx.begin(), idx.end(), 0);
    const MatrixXd y = m.net.forward(encode_inputs(m, window_ptrs(d, idx)));
    std::vector<ContactState> out;
    out.reserve(d.windows.size());
    for (std::size_t b = 0; b < d.windows.size(); ++b) {
        out.push_back(decode(m, y.col(static_cast<Eigen::Index>(b)).data(), d.windows[b].follower.back()));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model container

namespace {

constexpr const char* kMagic = "decompgrind-policy";
constexpr int kFormatVersion = 1;

void put_stats(std::ostream& out, const char* key, const std::array<double, kStateDim>& v) {
    out << key;
    for (double x : v) out << ' ' << x;
    out << '\n';
}

void get_stats(std::istream& in, const char* key, std::array<double, kStateDim>& v) {
    std::string k;
    if (!(in >> k) || k != key) throw PolicyError(std::string("model file: expected ") + key);
    for (auto& x : v) {
        if (!(in >> x) || !std::isfinite(x)) throw PolicyError(std::string("model file: bad ") + key);
    }
}

}  // namespace

void save_model(std::ostream& out, const PolicyModel& m) {
    if (!m.trained()) throw PolicyError("cannot save an untrained model");
    out << kMagic << ' ' << kFormatVersion << '\n';
    out << "window=" << m.window << " layers=" << m.config.layers << " hidden=" << m.config.hidden
        << " relative=" << (m.config.relative_positions ? 1 : 0) << " compress=" << (m.config.compress ? 1 : 0)
        << " state_dim=" << kStateDim << '\n';
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    put_stats(out, "input_scale", m.input.scale);
    put_stats(out, "output_scale", m.output.scale);
    put_stats(out, "input_mean", m.input.mean);
    put_stats(out, "input_std", m.input.stdev);
    put_stats(out, "output_mean", m.output.mean);
    put_stats(out, "output_std", m.output.stdev);
    m.net.save(out);
}

PolicyModel load_model(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != kMagic) throw PolicyError("not a policy model file");
    if (version != kFormatVersion) throw PolicyError("unsupported model format version " + std::to_string(version));
    PolicyModel m;
    int relative = 1, compress = 1, state_dim = 0;
    for (int k = 0; k < 6; ++k) {
        std::string tok;
        if (!(in >> tok)) throw PolicyError("model file: truncated header");
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw PolicyError("model file: malformed header field " + tok);
        const std::string key = tok.substr(0, eq);
        const int value = std::stoi(tok.substr(eq + 1));
        if (key == "window") m.window = value;
        else if (key == "layers") m.config.layers = value;
        else if (key == "hidden") m.config.hidden = value;
        else if (key == "relative") relative = value;
        else if (key == "compress") compress = value;
        else if (key == "state_dim") state_dim = value;
        else throw PolicyError("model file: unknown header field " + key);
    }
    if (state_dim != kStateDim || m.window < 1) throw PolicyError("model file: incompatible dimensions");
    m.config.relative_positions = relative != 0;
    m.config.compress = compress != 0;
    get_stats(in, "input_scale", m.input.scale);
    get_stats(in, "output_scale", m.output.scale);
    get_stats(in, "input_mean", m.input.mean);
    get_stats(in, "input_std", m.input.stdev);
    get_stats(in, "output_mean", m.output.mean);
    get_stats(in, "output_std", m.output.stdev);
    for (int c = 0; c < kStateDim; ++c) {
        const bool scaled = !m.config.compress || c >= kCompressedChannels ||
                            (m.input.scale[c] > 0.0 && m.output.scale[c] > 0.0);
        if (!(m.input.stdev[c] > 0.0) || !(m.output.stdev[c] > 0.0) || !scaled) {
            throw PolicyError("model file: scales must be positive");
        }
    }
    m.net = LstmRegressor(LstmShape{kStateDim, m.config.hidden, m.config.layers, kStateDim, true}, 0);
    try {
        m.net.load(in);
    } catch (const std::invalid_argument& e) {
        throw PolicyError(std::string("model file: ") + e.what());
    }
    return m;
}

void save_model(const std::string& path, const PolicyModel& m) {
    std::ofstream out(path);
    if (!out) throw PolicyError("cannot write " + path);
    save_model(out, m);
}

PolicyModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PolicyError("cannot read " + path);
    return load_model(in);
}

// ---------------------------------------------------------------------------
// Leader sources

PolicyLeader::PolicyLeader(const PolicyModel& model, double period) : model_(model), period_(period) {
    if (!model.trained()) throw PolicyError("policy leader needs a trained model");
    if (!(period > 0.0)) throw PolicyError("policy period must be positive");
}

void PolicyLeader::reset(const GrindSimState& sim) {
    history_.clear();
    predictions_ = 0;
    since_update_ = 0.0;
    predicted_ = sim.follower;
    predicted_.role = Role::Leader;
    predicted_.force = -sim.follower.force;
}

void PolicyLeader::update(const GrindSimState& sim) {
    if (history_.empty()) history_.assign(static_cast<std::size_t>(model_.window), sim.follower);
    history_.push_back(sim.follower);
    while (history_.size() > static_cast<std::size_t>(model_.window)) history_.pop_front();
    predicted_ = predict(model_, std::vector<ContactState>(history_.begin(), history_.end()));
    ++predictions_;
    since_update_ = 0.0;
}

ContactState PolicyLeader::command(const GrindSimState&, double dt) {
    since_update_ += dt;
    // move along the predicted velocity, arriving at the predicted pose at the period end
    ContactState c = predicted_;
    c.position.normal -= predicted_.velocity.normal * std::max(0.0, period_ - since_update_);
    return c;
}

void ConstantFeedLeader::reset(const GrindSimState& sim) { position_ = sim.follower.position.normal; }

ContactState ConstantFeedLeader::command(const GrindSimState& sim, double dt) {
    position_ += feed_ * dt;
    ContactState l = sim.follower;
    l.role = Role::Leader;
    l.position.normal = position_;
    l.velocity = {feed_, sim.follower.velocity.tangential};
    l.force = -sim.follower.force;
    return l;
}

void CappedFeedLeader::reset(const GrindSimState& sim) { position_ = sim.follower.position.normal; }

ContactState CappedFeedLeader::command(const GrindSimState& sim, double dt) {
    const bool capped = std::abs(sim.follower.force.tangential) >= cap_;
    const double v = capped ? 0.0 : feed_;
    // never run ahead of the follower while capped
    if (capped) position_ = std::min(position_, sim.follower.position.normal);
    position_ += v * dt;
    ContactState l = sim.follower;
    l.role = Role::Leader;
    l.position.normal = position_;
    l.velocity = {v, sim.follower.velocity.tangential};
    l.force = -sim.follower.force;
    return l;
}

ContactState ExpertLeader::command(const GrindSimState& sim, double dt) {
    return expert_leader(sim.follower, gains_.target_force, gains_, state_, dt);
}

// ---------------------------------------------------------------------------
// Grinding loop

std::string_view to_string(GrindTermination t) {
    switch (t) {
        case GrindTermination::ReachedSurface: return "reached_surface";
        case GrindTermination::ForceLimit: return "force_limit";
        case GrindTermination::Timeout: return "timeout";
    }
    return "timeout";
}

void GrindOptions::validate() const {
    if (!(eps > 0.0)) throw PolicyError("eps must be positive");
    if (persistence < 1) throw PolicyError("persistence must be >= 1");
    if (!(force_limit > 0.0)) throw PolicyError("force limit must be positive");
    if (!(timeout > 0.0) || !(control_rate > 0.0) || !(dt > 0.0)) throw PolicyError("timeout, rate and dt must be positive");
    const double sub = 1.0 / (control_rate * dt);
    if (std::abs(sub - std::round(sub)) > 1e-6 || std::round(sub) < 1.0) {
        throw PolicyError("control period must be a whole number of simulation steps");
    }
}

GrindOutcome grind_with(LeaderSource& leader, GrindSimState& sim, const CuttingSurface& target,
                        const GrindOptions& opts) {
    opts.validate();
    target.validate(sim.mount.max_tilt);
    const double x_star = state_from_surface(target, sim.mount).position.normal;
    const auto substeps = static_cast<long>(std::llround(1.0 / (opts.control_rate * opts.dt)));
    const auto max_steps = static_cast<long>(std::ceil(opts.timeout * opts.control_rate - 1e-9));

    GrindOutcome out;
    leader.reset(sim);
    const double t0 = sim.time;
    int consecutive = 0;
    for (long k = 0; k < max_steps; ++k) {
        leader.update(sim);
        for (long s = 0; s < substeps; ++s) {
            ContactState cmd = leader.command(sim, opts.dt);
            if (cmd.position.normal >= x_star) {
                cmd.position.normal = x_star;
                cmd.velocity.normal = 0.0;
                cmd.force = -sim.follower.force;
            }
            step_in_place(sim, cmd, opts.dt);
            ++out.substeps;
            const bool ok = check_force_limit(sim, opts.force_limit);
            if (ok) ++out.in_limit_substeps;
            if (opts.log_substeps) out.force_trace.push_back(log_row(sim));
            if (!ok) {
                out.termination = GrindTermination::ForceLimit;
                out.control_steps = static_cast<std::size_t>(k + 1);
                out.elapsed = sim.time - t0;
                out.in_limit_ratio = static_cast<double>(out.in_limit_substeps) / static_cast<double>(out.substeps);
                return out;
            }
        }
        if (!opts.log_substeps) out.force_trace.push_back(log_row(sim));
        const double err = std::abs(surface_from_state(sim.follower, sim.mount).offset - target.offset);
        consecutive = err < opts.eps ? consecutive + 1 : 0;
        if (consecutive > opts.persistence) {
            out.termination = GrindTermination::ReachedSurface;
            out.control_steps = static_cast<std::size_t>(k + 1);
            break;
        }
        out.control_steps = static_cast<std::size_t>(k + 1);
    }
    out.elapsed = sim.time - t0;
    out.in_limit_ratio =
        out.substeps ? static_cast<double>(out.in_limit_substeps) / static_cast<double>(out.substeps) : 1.0;
    return out;
}

GrindOutcome grind_until_surface(const PolicyModel& model, GrindSimState& sim, const CuttingSurface& target, double eps,
                                 int persistence, double limit, double timeout) {
    GrindOptions opts;
    opts.eps = eps;
    opts.persistence = persistence;
    opts.force_limit = limit;
    opts.timeout = timeout;
    PolicyLeader leader(model, 1.0 / opts.control_rate);
    return grind_with(leader, sim, target, opts);
}

}  // namespace decompgrind
