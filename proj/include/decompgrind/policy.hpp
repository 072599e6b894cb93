#pragma once

#include "decompgrind/demo_expert.hpp"
#include "decompgrind/grind_sim.hpp"
#include "decompgrind/lstm.hpp"

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace decompgrind {

struct PolicyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ModelConfig {
    // One layer of 32 units: about 1200 training windows do not support more
    // without the closed loop degrading on unseen materials.
    int layers = 1;
    int hidden = 32;
    // Positions enter relative to the newest follower position, and the
    // predicted leader position is an offset from it. Off: absolute positions.
    bool relative_positions = true;
    // Position and velocity channels pass through asinh(x / s) before
    // standardization, s being a tenth of their RMS over the training windows,
    // so slow feeds on hard material keep the resolution of fast ones. Forces
    // stay linear. Off: all channels linear.
    bool compress = true;
};

struct TrainConfig {
    int epochs = 150;
    double learning_rate = 3e-3;
    int batch_size = 32;
    std::uint64_t seed = 7;

    void validate() const;
};

struct Normalizer {
    std::array<double, kStateDim> scale{};  // asinh scale, used when compressing
    std::array<double, kStateDim> mean{};
    std::array<double, kStateDim> stdev{};
};

/// Learned leader-state predictor: window of follower states -> next leader state.
struct PolicyModel {
    int window = 0;
    ModelConfig config;
    Normalizer input, output;
    LstmRegressor net;
    std::vector<double> loss_history;  // full-dataset loss after each epoch, normalized units
    double initial_loss = 0.0;         // same loss before the first update

    [[nodiscard]] bool trained() const { return window > 0; }
};

/// Least-squares fit of the next leader state (mini-batch Adam, full BPTT).
/// Throws PolicyError on an empty dataset, ragged windows, or a non-finite loss.
PolicyModel train(const Dataset& data, const ModelConfig& model_cfg, const TrainConfig& train_cfg);

/// Throws PolicyError when the window length is wrong or holds non-finite values.
ContactState predict(const PolicyModel& model, const std::vector<ContactState>& window);

/// Batched prediction over dataset windows.
std::vector<ContactState> predict_all(const PolicyModel& model, const Dataset& data);

/// Mean squared error of the model on a dataset in normalized output units.
double dataset_loss(const PolicyModel& model, const Dataset& data);

// Text container: "decompgrind-policy 1" header line, key=value dims, the
// normalization stats, then the weights layer by layer.
void save_model(std::ostream& out, const PolicyModel& m);
PolicyModel load_model(std::istream& in);
void save_model(const std::string& path, const PolicyModel& m);
PolicyModel load_model(const std::string& path);

// ---------------------------------------------------------------------------
// Execution

/// Source of leader commands for the bilateral loop.
class LeaderSource {
public:
    virtual ~LeaderSource() = default;
    virtual void reset(const GrindSimState& sim) = 0;
    /// Called once per control period (before its substeps).
    virtual void update(const GrindSimState& sim) = 0;
    /// Leader state for the next simulation substep.
    virtual ContactState command(const GrindSimState& sim, double dt) = 0;
};

/// The learned policy in place of the human leader: one prediction per
/// control period from the last `window` follower states sampled at that rate.
class PolicyLeader final : public LeaderSource {
public:
    PolicyLeader(const PolicyModel& model, double period);
    void reset(const GrindSimState& sim) override;
    void update(const GrindSimState& sim) override;
    ContactState command(const GrindSimState& sim, double dt) override;
    [[nodiscard]] std::size_t predictions() const { return predictions_; }

private:
    const PolicyModel& model_;
    double period_;
    std::deque<ContactState> history_;
    ContactState predicted_;
    double since_update_ = 0.0;
    std::size_t predictions_ = 0;
};

/// Constant normal feed (mm/s) from the pose at reset.
class ConstantFeedLeader final : public LeaderSource {
public:
    explicit ConstantFeedLeader(double feed) : feed_(feed) {}
    void reset(const GrindSimState& sim) override;
    void update(const GrindSimState&) override {}
    ContactState command(const GrindSimState& sim, double dt) override;

private:
    double feed_;
    double position_ = 0.0;
};

/// Position feed that stops advancing while |F_T| is at or above the cap.
class CappedFeedLeader final : public LeaderSource {
public:
    CappedFeedLeader(double feed, double force_cap) : feed_(feed), cap_(force_cap) {}
    void reset(const GrindSimState& sim) override;
    void update(const GrindSimState&) override {}
    ContactState command(const GrindSimState& sim, double dt) override;

private:
    double feed_, cap_;
    double position_ = 0.0;
};

/// The scripted demonstrator as a leader source.
class ExpertLeader final : public LeaderSource {
public:
    explicit ExpertLeader(const ExpertGains& gains) : gains_(gains) {}
    void reset(const GrindSimState&) override { state_ = {}; }
    void update(const GrindSimState&) override {}
    ContactState command(const GrindSimState& sim, double dt) override;

private:
    ExpertGains gains_;
    ExpertState state_;
};

enum class GrindTermination { ReachedSurface, ForceLimit, Timeout };
std::string_view to_string(GrindTermination t);

struct GrindOptions {
    double eps = 0.05;         // mm
    int persistence = 10;      // control steps
    double force_limit = 9.0;  // N, inclusive
    double timeout = 120.0;    // s
    double control_rate = 20.0;
    double dt = 1e-3;
    bool log_substeps = false;  // force_trace at every substep instead of every control step

    void validate() const;
};

struct GrindOutcome {
    GrindTermination termination = GrindTermination::Timeout;
    double elapsed = 0.0;
    double in_limit_ratio = 1.0;
    std::size_t substeps = 0;
    std::size_t in_limit_substeps = 0;
    std::size_t control_steps = 0;
    std::vector<SimLogRow> force_trace;

    [[nodiscard]] bool reached_surface() const { return termination == GrindTermination::ReachedSurface; }
    [[nodiscard]] bool aborted_force_limit() const { return termination == GrindTermination::ForceLimit; }
    [[nodiscard]] bool timed_out() const { return termination == GrindTermination::Timeout; }
};

/// Bilateral grinding loop toward `target`. The leader is never allowed to
/// command the contact surface past the target; there it holds position.
/// Ends when |c_con.x - c*.x| < eps for more than `persistence` consecutive
/// control steps, when |F_T| exceeds the limit, or at the timeout.
GrindOutcome grind_with(LeaderSource& leader, GrindSimState& sim, const CuttingSurface& target,
                        const GrindOptions& opts);

GrindOutcome grind_until_surface(const PolicyModel& model, GrindSimState& sim, const CuttingSurface& target,
                                 double eps = 0.05, int persistence = 10, double limit = 9.0, double timeout = 120.0);

}  // namespace decompgrind
