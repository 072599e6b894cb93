#pragma once

#include "decompgrind/point_cloud.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace decompgrind {

/// Static 3-D kd-tree for exact nearest-neighbour queries. Holds a copy of the
/// indexed points, so the source may go away after construction.
class KdTree {
public:
    struct Hit {
        std::size_t index = std::numeric_limits<std::size_t>::max();
        double sq_distance = std::numeric_limits<double>::infinity();
    };

    KdTree() = default;
    explicit KdTree(std::span<const Point3> points);

    [[nodiscard]] std::size_t size() const { return points_.size(); }

    [[nodiscard]] Hit nearest(const Point3& q) const;

    /// Nearest point whose index satisfies `accept`. Returns a default Hit when
    /// nothing is accepted.
    [[nodiscard]] Hit nearest_if(const Point3& q, const std::function<bool(std::size_t)>& accept) const;

private:
    struct Node {
        std::uint32_t begin = 0, end = 0;  // range into order_
        std::int32_t left = -1, right = -1;
        int axis = 0;
        double split = 0.0;
    };

    int build(std::uint32_t begin, std::uint32_t end, int depth);
    template <class Accept>
    void search(int node, const Point3& q, Hit& best, const Accept& accept) const;

    static constexpr std::uint32_t kLeafSize = 12;

    std::vector<Point3> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

}  // namespace decompgrind
