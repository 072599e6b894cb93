#include "decompgrind/point_cloud.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace decompgrind {

PointCloud::PointCloud(std::vector<Point3> points, double point_volume)
    : points_(std::move(points)), point_volume_(point_volume) {
    validate();
}

void PointCloud::validate() const {
    if (!(point_volume_ > 0.0) || !std::isfinite(point_volume_)) {
        throw GeometryError("point_volume must be positive and finite");
    }
    for (const auto& p : points_) {
        if (!p.allFinite()) throw GeometryError("point cloud contains a non-finite coordinate");
    }
}

std::pair<Point3, Point3> PointCloud::bounds() const {
    if (points_.empty()) throw GeometryError("bounds of an empty cloud");
    Point3 lo = points_.front();
    Point3 hi = points_.front();
    for (const auto& p : points_) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return {lo, hi};
}

PointCloud read_point_cloud(std::istream& in) {
    std::vector<Point3> pts;
    double volume = 1.0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        if (line[first] == '#') {
            const auto key = line.find("point_volume=", first);
            if (key != std::string::npos) {
                std::istringstream vs(line.substr(key + 13));
                if (!(vs >> volume)) throw GeometryError("bad point_volume header on line " + std::to_string(lineno));
            }
            continue;
        }
        std::istringstream ls(line);
        double x = 0, y = 0, z = 0;
        if (!(ls >> x >> y >> z)) throw GeometryError("expected 'x y z' on line " + std::to_string(lineno));
        pts.emplace_back(x, y, z);
    }
    return PointCloud(std::move(pts), volume);
}

PointCloud read_point_cloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open point cloud file: " + path);
    return read_point_cloud(in);
}

void write_point_cloud(std::ostream& out, const PointCloud& cloud) {
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    out << "# point_volume=" << cloud.point_volume() << '\n';
    for (const auto& p : cloud.points()) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
}

void write_point_cloud(const std::string& path, const PointCloud& cloud) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write point cloud file: " + path);
    write_point_cloud(out, cloud);
}

}  // namespace decompgrind
