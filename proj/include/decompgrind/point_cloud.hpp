#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace decompgrind {

using Point3 = Eigen::Vector3d;

struct GeometryError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Workpiece shape as a set of particle positions (mm) sharing a uniform
/// volume weight (mm^3 per point).
class PointCloud {
public:
    PointCloud() = default;
    explicit PointCloud(std::vector<Point3> points, double point_volume = 1.0);

    [[nodiscard]] std::span<const Point3> points() const { return points_; }
    [[nodiscard]] std::vector<Point3>& mutable_points() { return points_; }
    [[nodiscard]] const Point3& operator[](std::size_t i) const { return points_[i]; }
    [[nodiscard]] std::size_t size() const { return points_.size(); }
    [[nodiscard]] bool empty() const { return points_.empty(); }
    [[nodiscard]] double point_volume() const { return point_volume_; }
    [[nodiscard]] double volume() const { return point_volume_ * static_cast<double>(points_.size()); }

    void push_back(const Point3& p) { points_.push_back(p); }
    void reserve(std::size_t n) { points_.reserve(n); }

    /// Min and max corner; throws on an empty cloud.
    [[nodiscard]] std::pair<Point3, Point3> bounds() const;

    /// Throws GeometryError when a coordinate is non-finite or the weight is not positive.
    void validate() const;

private:
    std::vector<Point3> points_;
    double point_volume_ = 1.0;
};

// ASCII "x y z" per line; an optional "# point_volume=<mm^3>" header sets the
// weight. Blank lines and other '#' comments are skipped.
PointCloud read_point_cloud(std::istream& in);
PointCloud read_point_cloud(const std::string& path);
void write_point_cloud(std::ostream& out, const PointCloud& cloud);
void write_point_cloud(const std::string& path, const PointCloud& cloud);

}  // namespace decompgrind
