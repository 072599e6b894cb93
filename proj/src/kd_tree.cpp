#include "decompgrind/kd_tree.hpp"

#include <algorithm>
#include <numeric>

namespace decompgrind {

KdTree::KdTree(std::span<const Point3> points) : points_(points.begin(), points.end()) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    if (!points_.empty()) {
        nodes_.reserve(2 * points_.size() / kLeafSize + 2);
        build(0, static_cast<std::uint32_t>(points_.size()), 0);
    }
}

int KdTree::build(std::uint32_t begin, std::uint32_t end, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{begin, end, -1, -1, 0, 0.0});
    if (end - begin <= kLeafSize) return id;

    // split on the widest axis of this node's bounding box
    Point3 lo = points_[order_[begin]];
    Point3 hi = lo;
    for (auto i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[order_[mid]][axis];

    const int left = build(begin, mid, depth + 1);
    const int right = build(mid, end, depth + 1);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

template <class Accept>
void KdTree::search(int node_id, const Point3& q, Hit& best, const Accept& accept) const {
    const Node& node = nodes_[node_id];
    if (node.left < 0) {
        for (auto i = node.begin; i < node.end; ++i) {
            const auto idx = order_[i];
            const double d = (points_[idx] - q).squaredNorm();
            // ties resolve to the lower index so results do not depend on traversal order
            if ((d < best.sq_distance || (d == best.sq_distance && idx < best.index)) && accept(idx)) {
                best = {idx, d};
            }
        }
        return;
    }
    const double delta = q[node.axis] - node.split;
    const int near = delta < 0 ? node.left : node.right;
    const int far = delta < 0 ? node.right : node.left;
    search(near, q, best, accept);
    if (delta * delta <= best.sq_distance) search(far, q, best, accept);
}

KdTree::Hit KdTree::nearest(const Point3& q) const {
    Hit best;
    if (!nodes_.empty()) search(0, q, best, [](std::size_t) { return true; });
    return best;
}

KdTree::Hit KdTree::nearest_if(const Point3& q, const std::function<bool(std::size_t)>& accept) const {
    Hit best;
    if (!nodes_.empty()) search(0, q, best, accept);
    return best;
}

}  // namespace decompgrind
