#include "decompgrind/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <unordered_map>

namespace decompgrind {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double deg(double d) { return d * std::numbers::pi / 180.0; }

std::vector<double> default_angle_grid() {
    std::vector<double> g;
    for (int d = -30; d <= 30; d += 10) g.push_back(deg(d));
    return g;
}

}  // namespace

CuttingSurface PlannerConfig::candidate(std::size_t index) const {
    const std::size_t nx = x_grid.size();
    const std::size_t np = psi_grid.size();
    const std::size_t ix = index % nx;
    const std::size_t ip = (index / nx) % np;
    const std::size_t it = index / (nx * np);
    return {theta_grid.at(it), psi_grid.at(ip), x_grid.at(ix)};
}

void PlannerConfig::validate() const {
    if (horizon < 1) throw PlannerError("planner horizon must be >= 1");
    if (theta_grid.empty() || psi_grid.empty() || x_grid.empty()) throw PlannerError("planner grids must be non-empty");
    if (!(k_c >= 0.0)) throw PlannerError("k_c must be non-negative");
    if (replan_observation_period < 1) throw PlannerError("replan_observation_period must be >= 1");
}

void fit_x_grid(PlannerConfig& cfg, const PointCloud& cloud, double x_step) {
    if (cloud.empty()) throw PlannerError("cannot fit an x grid to an empty cloud");
    double lo = kInf, hi = -kInf;
    for (double t : cfg.theta_grid) {
        for (double p : cfg.psi_grid) {
            const Point3 n = CuttingSurface{t, p, 0.0}.normal();
            for (const auto& q : cloud.points()) {
                const double k = n.dot(q);
                lo = std::min(lo, k);
                hi = std::max(hi, k);
            }
        }
    }
    const long first = static_cast<long>(std::floor(lo / x_step));
    const long last = static_cast<long>(std::ceil(hi / x_step));
    cfg.x_grid.clear();
    for (long i = first; i <= last; ++i) cfg.x_grid.push_back(static_cast<double>(i) * x_step);
}

PlannerConfig default_planner_config(const PointCloud& cloud, double x_step) {
    PlannerConfig cfg;
    cfg.theta_grid = default_angle_grid();
    cfg.psi_grid = default_angle_grid();
    fit_x_grid(cfg, cloud, x_step);
    return cfg;
}

double removal_cost(const RemovalMetrics& m, double point_volume, double k_c) {
    if (m.volume <= 0.0) return 0.0;
    const double h = std::max(m.height, std::cbrt(point_volume));
    return k_c * m.volume / h;
}

double cost(const PointCloud& target, const PointCloud& shape, const CuttingSurface& surface, double k_c) {
    if (shape.empty() || target.empty()) throw GeometryError("cost needs non-empty shape and target");
    const auto parts = split(shape, surface);
    const double shape_error = chamfer(parts.next_shape, target);
    return shape_error + removal_cost(removal_metrics(shape, surface), shape.point_volume(), k_c);
}

// ---------------------------------------------------------------------------
// StageEvaluator

StageEvaluator::StageEvaluator(const PointCloud& shape, const PointCloud& target)
    : shape_(shape), target_(target), shape_tree_(shape.points()) {
    if (shape.empty() || target.empty()) throw GeometryError("stage evaluator needs non-empty clouds");
    const KdTree target_tree(target.points());
    shape_to_target_.resize(shape.size());
    for (std::size_t i = 0; i < shape.size(); ++i) {
        shape_to_target_[i] = target_tree.nearest(shape[i]).sq_distance;
        shape_sum_ += shape_to_target_[i];
    }
    target_nn_.resize(target.size());
    target_to_shape_.resize(target.size());
    for (std::size_t j = 0; j < target.size(); ++j) {
        const auto hit = shape_tree_.nearest(target[j]);
        target_nn_[j] = static_cast<std::uint32_t>(hit.index);
        target_to_shape_[j] = hit.sq_distance;
        target_sum_ += hit.sq_distance;
    }
}

namespace {

// Sum of squared distances from each target point to the kept part of the shape.
double kept_term(const PointCloud& shape, const PointCloud& target, const KdTree& shape_tree,
                 std::span<const double> shape_keys, double x, std::span<const std::uint32_t> target_nn,
                 std::span<const double> target_to_shape) {
    std::vector<std::size_t> affected;
    double sum = 0.0;
    for (std::size_t j = 0; j < target.size(); ++j) {
        if (shape_keys[target_nn[j]] > x) {
            affected.push_back(j);
        } else {
            sum += target_to_shape[j];
        }
    }
    if (affected.empty()) return sum;
    if (affected.size() < 64) {
        for (auto j : affected) {
            sum += shape_tree.nearest_if(target[j], [&](std::size_t i) { return shape_keys[i] <= x; }).sq_distance;
        }
        return sum;
    }
    std::vector<Point3> kept;
    kept.reserve(shape.size());
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (shape_keys[i] <= x) kept.push_back(shape[i]);
    }
    const KdTree kept_tree(kept);
    for (auto j : affected) sum += kept_tree.nearest(target[j]).sq_distance;
    return sum;
}

}  // namespace

double StageEvaluator::evaluate(const CuttingSurface& surface, double k_c) const {
    const Point3 n = surface.normal();
    std::vector<double> keys(shape_.size());
    double removed_sum = 0.0;
    std::size_t removed = 0;
    double lo = kInf, hi = -kInf;
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        keys[i] = n.dot(shape_[i]);
        if (keys[i] > surface.offset) {
            ++removed;
            removed_sum += shape_to_target_[i];
            lo = std::min(lo, keys[i]);
            hi = std::max(hi, keys[i]);
        }
    }
    if (removed == shape_.size()) return kInf;
    const double kept = static_cast<double>(shape_.size() - removed);
    const double term1 = (shape_sum_ - removed_sum) / kept;
    const double term2 = kept_term(shape_, target_, shape_tree_, keys, surface.offset, target_nn_, target_to_shape_) /
                         static_cast<double>(target_.size());
    const RemovalMetrics m = removed ? RemovalMetrics{static_cast<double>(removed) * shape_.point_volume(), hi - lo}
                                     : RemovalMetrics{};
    return term1 + term2 + removal_cost(m, shape_.point_volume(), k_c);
}

std::size_t StageEvaluator::argmin(const PlannerConfig& cfg, double* best_cost, std::size_t* exact_evaluations) const {
    const std::size_t n_shape = shape_.size();
    const std::size_t n_target = target_.size();
    const std::size_t nx = cfg.x_grid.size();

    struct Bound {
        double lower;
        std::size_t index;
        std::size_t orientation;
    };
    std::vector<Bound> bounds;
    bounds.reserve(cfg.candidate_count());

    // Per orientation: shape keys sorted descending with running sums of the
    // shape->target distances, so the removed part of term 1 is a prefix.
    std::vector<std::vector<double>> orientation_keys;
    std::vector<CuttingSurface> orientations;
    std::vector<std::size_t> order(n_shape);
    std::vector<double> target_keys(n_target);

    for (double theta : cfg.theta_grid) {
        for (double psi : cfg.psi_grid) {
            const std::size_t o = orientations.size();
            orientations.push_back({theta, psi, 0.0});
            const Point3 n = orientations.back().normal();
            std::vector<double> keys(n_shape);
            for (std::size_t i = 0; i < n_shape; ++i) keys[i] = n.dot(shape_[i]);
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] > keys[b]; });
            std::vector<double> prefix(n_shape + 1, 0.0);
            for (std::size_t r = 0; r < n_shape; ++r) prefix[r + 1] = prefix[r] + shape_to_target_[order[r]];
            for (std::size_t j = 0; j < n_target; ++j) target_keys[j] = n.dot(target_[j]);

            for (std::size_t ix = 0; ix < nx; ++ix) {
                const double x = cfg.x_grid[ix];
                // number of shape points strictly beyond the plane
                const std::size_t removed = static_cast<std::size_t>(
                    std::partition_point(order.begin(), order.end(), [&](std::size_t i) { return keys[i] > x; }) -
                    order.begin());
                const std::size_t index = o * nx + ix;
                if (removed == n_shape) continue;
                const double term1 = (prefix[n_shape] - prefix[removed]) / static_cast<double>(n_shape - removed);
                RemovalMetrics m;
                if (removed > 0) {
                    m.volume = static_cast<double>(removed) * shape_.point_volume();
                    m.height = keys[order[0]] - keys[order[removed - 1]];
                }
                double term2 = 0.0;
                for (std::size_t j = 0; j < n_target; ++j) {
                    const double above = target_keys[j] - x;
                    const double plane_bound = above > 0.0 ? above * above : 0.0;
                    term2 += std::max(target_to_shape_[j], plane_bound);
                }
                const double lower =
                    term1 + term2 / static_cast<double>(n_target) + removal_cost(m, shape_.point_volume(), cfg.k_c);
                bounds.push_back({lower, index, o});
            }
            orientation_keys.push_back(std::move(keys));
        }
    }

    std::sort(bounds.begin(), bounds.end(),
              [](const Bound& a, const Bound& b) { return a.lower < b.lower || (a.lower == b.lower && a.index < b.index); });

    double best = kInf;
    std::size_t best_index = npos;
    std::size_t exact = 0;
    for (const auto& b : bounds) {
        const double slack = 1e-9 * (1.0 + std::abs(best));
        if (b.lower > best + slack) break;
        const CuttingSurface c = cfg.candidate(b.index);
        const auto& keys = orientation_keys[b.orientation];
        double removed_sum = 0.0;
        std::size_t removed = 0;
        double lo = kInf, hi = -kInf;
        for (std::size_t i = 0; i < n_shape; ++i) {
            if (keys[i] > c.offset) {
                ++removed;
                removed_sum += shape_to_target_[i];
                lo = std::min(lo, keys[i]);
                hi = std::max(hi, keys[i]);
            }
        }
        const double term1 = (shape_sum_ - removed_sum) / static_cast<double>(n_shape - removed);
        const double term2 = kept_term(shape_, target_, shape_tree_, keys, c.offset, target_nn_, target_to_shape_) /
                             static_cast<double>(n_target);
        const RemovalMetrics m =
            removed ? RemovalMetrics{static_cast<double>(removed) * shape_.point_volume(), hi - lo} : RemovalMetrics{};
        const double value = term1 + term2 + removal_cost(m, shape_.point_volume(), cfg.k_c);
        ++exact;
        if (value < best || (value == best && b.index < best_index)) {
            best = value;
            best_index = b.index;
        }
    }
    if (best_cost) *best_cost = best;
    if (exact_evaluations) *exact_evaluations = exact;
    return best_index;
}

// ---------------------------------------------------------------------------
// plan

namespace {

PlanResult plan_greedy(const PointCloud& current, const PointCloud& target, const PlannerConfig& cfg) {
    PlanResult result;
    result.predicted_shapes.push_back(current);
    double total = 0.0;
    for (int h = 0; h < cfg.horizon; ++h) {
        const PointCloud& shape = result.predicted_shapes.back();
        std::size_t best_index = StageEvaluator::npos;
        double best = kInf;
        if (shape.size() >= cfg.fast_eval_min_points) {
            const StageEvaluator eval(shape, target);
            std::size_t exact = 0;
            best_index = eval.argmin(cfg, &best, &exact);
            result.evaluations += exact;
        } else {
            for (std::size_t k = 0; k < cfg.candidate_count(); ++k) {
                const CuttingSurface c = cfg.candidate(k);
                if (removal_metrics(shape, c).volume >= shape.volume()) continue;  // empties the shape
                const double v = cost(target, shape, c, cfg.k_c);
                ++result.evaluations;
                if (v < best) {
                    best = v;
                    best_index = k;
                }
            }
        }
        if (best_index == StageEvaluator::npos) {
            throw PlannerError("no feasible cutting surface at stage " + std::to_string(h));
        }
        const CuttingSurface c = cfg.candidate(best_index);
        const double stage_cost = shape.size() >= cfg.fast_eval_min_points ? cost(target, shape, c, cfg.k_c) : best;
        result.surfaces.push_back(c);
        result.per_step_cost.push_back(stage_cost);
        total += stage_cost;
        result.predicted_shapes.push_back(split(shape, c).next_shape);
    }
    result.objective = total / cfg.horizon;
    return result;
}

// Exact search over the product grid. Every reachable shape is a subset of the
// input, so shapes are interned as keep-masks and each distinct shape is
// scored against the grid only once.
class ExhaustiveSearch {
public:
    ExhaustiveSearch(const PointCloud& current, const PointCloud& target, const PlannerConfig& cfg)
        : current_(current), target_(target), cfg_(cfg) {}

    PlanResult run() {
        const int root = intern(std::vector<char>(current_.size(), 1));
        std::vector<std::size_t> seq;
        dfs(root, 0, 0.0, seq);
        if (best_seq_.empty()) throw PlannerError("no feasible cutting-surface sequence");

        PlanResult result;
        result.evaluations = evaluations_;
        result.predicted_shapes.push_back(current_);
        int node = root;
        for (std::size_t h = 0; h < best_seq_.size(); ++h) {
            const std::size_t k = best_seq_[h];
            result.surfaces.push_back(cfg_.candidate(k));
            result.per_step_cost.push_back(nodes_[node].costs[k]);
            node = nodes_[node].children[k];
            result.predicted_shapes.push_back(nodes_[node].cloud);
        }
        result.objective = best_total_;
        return result;
    }

private:
    struct Node {
        std::vector<char> keep;
        PointCloud cloud;
        std::vector<double> costs;
        std::vector<int> children;
        bool expanded = false;
    };

    int intern(std::vector<char> keep) {
        std::string key(keep.begin(), keep.end());
        if (auto it = index_.find(key); it != index_.end()) return it->second;
        std::vector<Point3> pts;
        for (std::size_t i = 0; i < keep.size(); ++i) {
            if (keep[i]) pts.push_back(current_[i]);
        }
        nodes_.push_back(Node{std::move(keep), PointCloud(std::move(pts), current_.point_volume()), {}, {}, false});
        const int id = static_cast<int>(nodes_.size()) - 1;
        index_.emplace(std::move(key), id);
        return id;
    }

    void expand(int id) {
        const std::size_t n = cfg_.candidate_count();
        std::vector<double> costs(n, kInf);
        std::vector<int> children(n, -1);
        for (std::size_t k = 0; k < n; ++k) {
            const CuttingSurface c = cfg_.candidate(k);
            const Point3 normal = c.normal();
            std::vector<char> keep = nodes_[id].keep;
            std::size_t kept = 0;
            for (std::size_t i = 0; i < keep.size(); ++i) {
                if (keep[i] && normal.dot(current_[i]) - c.offset > 0.0) keep[i] = 0;
                kept += keep[i] ? 1 : 0;
            }
            if (kept == 0) continue;
            costs[k] = cost(target_, nodes_[id].cloud, c, cfg_.k_c);
            ++evaluations_;
            const int child = intern(std::move(keep));
            children[k] = child;
        }
        nodes_[id].costs = std::move(costs);
        nodes_[id].children = std::move(children);
        nodes_[id].expanded = true;
    }

    void dfs(int id, int stage, double prefix, std::vector<std::size_t>& seq) {
        if (stage == cfg_.horizon) {
            const double total = prefix / cfg_.horizon;
            if (total < best_total_) {
                best_total_ = total;
                best_seq_ = seq;
            }
            return;
        }
        if (!nodes_[id].expanded) expand(id);
        const std::size_t n = cfg_.candidate_count();
        for (std::size_t k = 0; k < n; ++k) {
            const int child = nodes_[id].children[k];
            if (child < 0) continue;
            seq.push_back(k);
            dfs(child, stage + 1, prefix + nodes_[id].costs[k], seq);
            seq.pop_back();
        }
    }

    const PointCloud& current_;
    const PointCloud& target_;
    const PlannerConfig& cfg_;
    std::vector<Node> nodes_;
    std::unordered_map<std::string, int> index_;
    std::size_t evaluations_ = 0;
    double best_total_ = kInf;
    std::vector<std::size_t> best_seq_;
};

}  // namespace

PlanResult plan(const PointCloud& current, const PointCloud& target, const PlannerConfig& cfg) {
    cfg.validate();
    if (current.empty() || target.empty()) throw PlannerError("plan needs non-empty current and target shapes");

    bool exhaustive = cfg.search == PlannerSearch::Exhaustive;
    if (cfg.search == PlannerSearch::Auto) {
        const double work = std::pow(static_cast<double>(cfg.candidate_count()), cfg.horizon) *
                            static_cast<double>(current.size());
        exhaustive = work <= cfg.exhaustive_budget;
    }
    return exhaustive ? ExhaustiveSearch(current, target, cfg).run() : plan_greedy(current, target, cfg);
}

CuttingSurface next_surface(const PointCloud& current, const PointCloud& target, const PlannerConfig& cfg) {
    return plan(current, target, cfg).surfaces.front();
}

}  // namespace decompgrind
