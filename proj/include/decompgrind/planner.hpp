#pragma once

#include "decompgrind/geometry.hpp"
#include "decompgrind/kd_tree.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace decompgrind {

struct PlannerError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class PlannerSearch {
    Auto,        // exhaustive while the product grid fits the budget, greedy otherwise
    Greedy,      // stage-wise argmin on the rolled-out shape
    Exhaustive,  // exact minimum over the product grid
};

struct PlannerConfig {
    int horizon = 2;
    std::vector<double> theta_grid;
    std::vector<double> psi_grid;
    std::vector<double> x_grid;
    // Small enough that a flat cut at the target boundary beats tilted cuts
    // that trade target material for a taller removal shape.
    double k_c = 5e-4;
    int replan_observation_period = 2;
    PlannerSearch search = PlannerSearch::Auto;
    // Auto picks exhaustive search when (#candidates)^H * |cloud| stays below this.
    double exhaustive_budget = 5e7;
    // Clouds at least this large are scored by the bounded incremental evaluator.
    std::size_t fast_eval_min_points = 2000;

    [[nodiscard]] std::size_t candidate_count() const {
        return theta_grid.size() * psi_grid.size() * x_grid.size();
    }
    [[nodiscard]] CuttingSurface candidate(std::size_t index) const;
    void validate() const;
};

/// Angle grids of +/-30 deg in 10 deg steps and an x grid covering every
/// projection of `cloud` on the candidate normals in `x_step` increments
/// (aligned to multiples of x_step).
PlannerConfig default_planner_config(const PointCloud& cloud, double x_step = 1.0);

/// Re-derive the x grid of `cfg` for a new cloud, keeping its angle grids.
void fit_x_grid(PlannerConfig& cfg, const PointCloud& cloud, double x_step = 1.0);

struct PlanResult {
    std::vector<CuttingSurface> surfaces;       // length H
    std::vector<double> per_step_cost;          // length H
    std::vector<PointCloud> predicted_shapes;   // length H + 1, [0] is the input shape
    double objective = 0.0;                     // (1/H) * sum of per-step costs
    std::size_t evaluations = 0;
};

/// Stage cost: chamfer(G_O(shape, surface), target) + k_c V / h.
///
/// The removal height is floored at the sampling length cbrt(point_volume) so a
/// single-layer removal has finite cost; an empty removal costs nothing.
double cost(const PointCloud& target, const PointCloud& shape, const CuttingSurface& surface, double k_c);

/// Removal-shape term k_c V / h of the stage cost.
double removal_cost(const RemovalMetrics& m, double point_volume, double k_c);

/// Receding-horizon cutting-surface optimisation over the candidate grid.
/// Ties are broken by grid order (theta, then psi, then x). Throws PlannerError
/// when every candidate empties the shape.
PlanResult plan(const PointCloud& current, const PointCloud& target, const PlannerConfig& cfg);

/// First surface of plan(); the only one executed before replanning.
CuttingSurface next_surface(const PointCloud& current, const PointCloud& target, const PlannerConfig& cfg);

/// Scores every candidate for one stage on a large shape. Uses a per-candidate
/// lower bound so only promising candidates get an exact chamfer evaluation.
/// Keeps references to both clouds; they must outlive the evaluator.
class StageEvaluator {
public:
    StageEvaluator(const PointCloud& shape, const PointCloud& target);

    /// Exact stage cost of one candidate; +inf when the candidate empties the shape.
    [[nodiscard]] double evaluate(const CuttingSurface& surface, double k_c) const;

    /// Index of the cheapest candidate in grid order, or npos when all are degenerate.
    [[nodiscard]] std::size_t argmin(const PlannerConfig& cfg, double* best_cost = nullptr,
                                     std::size_t* exact_evaluations = nullptr) const;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    const PointCloud& shape_;
    const PointCloud& target_;
    std::vector<double> shape_to_target_;   // squared NN distance of each shape point
    std::vector<std::uint32_t> target_nn_;  // NN index in shape of each target point
    std::vector<double> target_to_shape_;   // squared NN distance of each target point
    double shape_sum_ = 0.0;
    double target_sum_ = 0.0;
    KdTree shape_tree_;
};

}  // namespace decompgrind
