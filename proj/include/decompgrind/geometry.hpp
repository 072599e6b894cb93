#pragma once

#include "decompgrind/contact_state.hpp"
#include "decompgrind/point_cloud.hpp"

#include <numbers>

namespace decompgrind {

/// Oriented cutting plane c = [theta, psi, x] in the workpiece frame.
///
/// The plane normal is R_y(theta) R_z(psi) e_x, i.e. the grinding direction
/// tilted about the lateral (y) and longitudinal (z) axes. Points with
/// n.p - offset > 0 lie on the belt side and are removed.
struct CuttingSurface {
    double theta = 0.0;
    double psi = 0.0;
    double offset = 0.0;  // mm along the normal

    [[nodiscard]] Point3 normal() const;
    [[nodiscard]] double signed_distance(const Point3& p) const { return normal().dot(p) - offset; }
    /// Throws GeometryError when the angles leave [-max_tilt, max_tilt] or a field is non-finite.
    void validate(double max_tilt = std::numbers::pi / 2) const;

    friend bool operator==(const CuttingSurface&, const CuttingSurface&) = default;
};

struct SplitResult {
    PointCloud next_shape;
    PointCloud removal_shape;
};

struct RemovalMetrics {
    double volume = 0.0;  // mm^3
    double height = 0.0;  // mm, extent of the removal shape along the plane normal
};

/// Geometric cutting model: partitions a shape by a plane. Points exactly on
/// the plane stay in the next shape.
SplitResult split(const PointCloud& cloud, const CuttingSurface& surface);

/// Chamfer discrepancy (mm^2): mean squared nearest-neighbour distance in both
/// directions. Throws GeometryError on an empty input.
double chamfer(const PointCloud& a, const PointCloud& b);

/// Cloud size above which chamfer() switches from brute force to a kd-tree.
inline constexpr std::size_t kChamferIndexThreshold = 1000;

RemovalMetrics removal_metrics(const PointCloud& cloud, const CuttingSurface& surface);

/// Fixed geometry of the cell. The follower holds the workpiece so that its
/// +x axis points at the belt; advancing the follower along the world normal
/// by d moves every workpiece point d closer to the belt plane.
struct MountConfig {
    double belt_position = 0.0;   // world normal coordinate of the belt plane (mm)
    double tool_offset = 0.0;     // normal offset of the workpiece origin from the end effector (mm)
    double max_tilt = std::numbers::pi / 2;  // reachable |theta|, |psi| (rad)
};

/// Contact surface c_con: the belt plane expressed in the workpiece frame for
/// the given follower pose.
CuttingSurface surface_from_state(const ContactState& follower, const MountConfig& mount);

/// Follower pose whose contact surface equals `surface`. Tangential position,
/// velocity and force are zero. Throws GeometryError if the tilt is unreachable.
ContactState state_from_surface(const CuttingSurface& surface, const MountConfig& mount);

}  // namespace decompgrind
