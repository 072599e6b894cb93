#include "decompgrind/geometry.hpp"

#include "decompgrind/kd_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace decompgrind {

Point3 CuttingSurface::normal() const {
    const double ct = std::cos(theta), st = std::sin(theta);
    const double cp = std::cos(psi), sp = std::sin(psi);
    // R_y(theta) * R_z(psi) * e_x
    return {ct * cp, sp, -st * cp};
}

void CuttingSurface::validate(double max_tilt) const {
    if (!std::isfinite(theta) || !std::isfinite(psi) || !std::isfinite(offset)) {
        throw GeometryError("cutting surface has a non-finite field");
    }
    if (std::abs(theta) > max_tilt || std::abs(psi) > max_tilt) {
        throw GeometryError("cutting surface tilt outside the reachable range");
    }
}

SplitResult split(const PointCloud& cloud, const CuttingSurface& surface) {
    const Point3 n = surface.normal();
    std::vector<Point3> keep, cut;
    keep.reserve(cloud.size());
    for (const auto& p : cloud.points()) {
        if (n.dot(p) - surface.offset > 0.0) {
            cut.push_back(p);
        } else {
            keep.push_back(p);
        }
    }
    return {PointCloud(std::move(keep), cloud.point_volume()), PointCloud(std::move(cut), cloud.point_volume())};
}

namespace {

double mean_nearest_brute(const PointCloud& from, const PointCloud& to) {
    double sum = 0.0;
    for (const auto& p : from.points()) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : to.points()) best = std::min(best, (p - q).squaredNorm());
        sum += best;
    }
    return sum / static_cast<double>(from.size());
}

double mean_nearest_indexed(const PointCloud& from, const KdTree& to) {
    double sum = 0.0;
    for (const auto& p : from.points()) sum += to.nearest(p).sq_distance;
    return sum / static_cast<double>(from.size());
}

}  // namespace

double chamfer(const PointCloud& a, const PointCloud& b) {
    if (a.empty() || b.empty()) throw GeometryError("chamfer discrepancy is undefined for an empty cloud");
    if (std::max(a.size(), b.size()) <= kChamferIndexThreshold) {
        return mean_nearest_brute(a, b) + mean_nearest_brute(b, a);
    }
    const KdTree ta(a.points());
    const KdTree tb(b.points());
    return mean_nearest_indexed(a, tb) + mean_nearest_indexed(b, ta);
}

RemovalMetrics removal_metrics(const PointCloud& cloud, const CuttingSurface& surface) {
    const Point3 n = surface.normal();
    std::size_t count = 0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& p : cloud.points()) {
        const double key = n.dot(p);
        if (key - surface.offset > 0.0) {
            ++count;
            lo = std::min(lo, key);
            hi = std::max(hi, key);
        }
    }
    if (count == 0) return {};
    return {static_cast<double>(count) * cloud.point_volume(), hi - lo};
}

CuttingSurface surface_from_state(const ContactState& follower, const MountConfig& mount) {
    return {follower.orientation.theta, follower.orientation.psi,
            mount.belt_position - mount.tool_offset - follower.position.normal};
}

ContactState state_from_surface(const CuttingSurface& surface, const MountConfig& mount) {
    surface.validate(mount.max_tilt);
    ContactState s;
    s.role = Role::Follower;
    s.orientation = {surface.theta, surface.psi};
    s.position.normal = mount.belt_position - mount.tool_offset - surface.offset;
    return s;
}

}  // namespace decompgrind
