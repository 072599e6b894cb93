#pragma once

#include <cmath>
#include <string_view>

namespace decompgrind {

/// Value on the two controlled axes: normal (X, grinding direction) and
/// tangential (Z, belt running direction).
struct Axes2 {
    double normal = 0.0;
    double tangential = 0.0;

    friend Axes2 operator+(Axes2 a, Axes2 b) { return {a.normal + b.normal, a.tangential + b.tangential}; }
    friend Axes2 operator-(Axes2 a, Axes2 b) { return {a.normal - b.normal, a.tangential - b.tangential}; }
    friend Axes2 operator*(double s, Axes2 a) { return {s * a.normal, s * a.tangential}; }
    friend Axes2 operator-(Axes2 a) { return {-a.normal, -a.tangential}; }
    friend bool operator==(const Axes2&, const Axes2&) = default;

    [[nodiscard]] bool finite() const { return std::isfinite(normal) && std::isfinite(tangential); }
};

enum class Role { Leader, Follower };

[[nodiscard]] constexpr std::string_view to_string(Role r) {
    return r == Role::Leader ? "leader" : "follower";
}

/// End-effector orientation that makes the tool plane parallel to a cutting
/// surface. Only the two tilt angles matter; the belt is assumed wide.
struct Tilt {
    double theta = 0.0;  // about the workpiece lateral axis (rad)
    double psi = 0.0;    // about the workpiece longitudinal axis (rad)
    friend bool operator==(const Tilt&, const Tilt&) = default;
};

/// Bilateral-control contact state z = (x, xdot, F) on both axes.
///
/// Force is the external force acting on the robot along each axis; for the
/// follower this is the reaction from the belt (negative while pressing), so
/// that the action-reaction objective reads F_leader + F_follower = 0.
struct ContactState {
    Axes2 position;  // mm
    Axes2 velocity;  // mm/s
    Axes2 force;     // N
    Tilt orientation;
    Role role = Role::Follower;

    [[nodiscard]] bool finite() const {
        return position.finite() && velocity.finite() && force.finite() &&
               std::isfinite(orientation.theta) && std::isfinite(orientation.psi);
    }
};

}  // namespace decompgrind
