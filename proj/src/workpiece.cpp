#include "decompgrind/workpiece.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace decompgrind {

std::string_view to_string(WorkpieceFamily f) {
    switch (f) {
        case WorkpieceFamily::E: return "WP-E";
        case WorkpieceFamily::T: return "WP-T";
        case WorkpieceFamily::S: return "WP-S";
        case WorkpieceFamily::Custom: return "custom";
    }
    return "custom";
}

namespace {

void check_segment(const CylinderSegment& s, const char* what) {
    if (!(s.diameter > 0.0) || !(s.height > 0.0) || !std::isfinite(s.diameter) || !std::isfinite(s.height)) {
        throw std::invalid_argument(std::string(what) + " segment needs positive diameter and height");
    }
}

}  // namespace

void WorkpieceSpec::validate() const {
    check_segment(base, "base");
    for (const auto& s : target) check_segment(s, "target");
    if (removable.empty()) throw std::invalid_argument("workpiece has no removable material");
    for (const auto& s : removable) check_segment(s, "removable");
    if (!(density > 0.0) || density > 100.0) throw std::invalid_argument("density must lie in (0, 100]");
    if (family != WorkpieceFamily::Custom && density != 30.0 && density != 45.0 && density != 60.0) {
        throw std::invalid_argument("named workpiece families use 30, 45 or 60 % density");
    }
    if (!(resolution > 0.0) || !std::isfinite(resolution)) throw std::invalid_argument("resolution must be positive");
}

double WorkpieceSpec::interface_height() const {
    double h = base.height;
    for (const auto& s : target) h += s.height;
    return h;
}

double WorkpieceSpec::total_height() const {
    double h = interface_height();
    for (const auto& s : removable) h += s.height;
    return h;
}

double WorkpieceSpec::cell_size() const { return 1.0 / std::cbrt(resolution); }

WorkpieceSpec named_workpiece(std::string_view name) {
    WorkpieceSpec w;
    w.name = std::string(name);
    auto simple = [&](WorkpieceFamily fam, double density, double d, double h) {
        w.family = fam;
        w.density = density;
        w.base = {30.0, 5.0};
        w.removable = {{d, h}};
        return w;
    };
    if (name == "WP-E1") {
        w.family = WorkpieceFamily::E;
        w.density = 30.0;
        w.base = {30.0, 5.0};
        w.target = {{25.0, 8.0}};
        w.removable = {{25.0, 6.0}};
        return w;
    }
    if (name == "WP-E2") {
        w.family = WorkpieceFamily::E;
        w.density = 45.0;
        w.base = {30.0, 5.0};
        w.target = {{20.0, 8.0}};
        w.removable = {{20.0, 4.0}, {14.0, 6.0}};
        return w;
    }
    if (name == "WP-E3") {
        w.family = WorkpieceFamily::E;
        w.density = 60.0;
        w.base = {20.0, 5.0};
        w.target = {{8.0, 12.0}};
        w.removable = {{8.0, 10.0}};
        return w;
    }
    if (name == "WP-T1") return simple(WorkpieceFamily::T, 30.0, 10.0, 20.0);
    if (name == "WP-T2") return simple(WorkpieceFamily::T, 60.0, 25.0, 2.0);
    if (name == "WP-S1") return simple(WorkpieceFamily::S, 30.0, 10.0, 20.0);
    if (name == "WP-S2") return simple(WorkpieceFamily::S, 30.0, 14.0, 15.0);
    if (name == "WP-S3") return simple(WorkpieceFamily::S, 45.0, 17.0, 15.0);
    if (name == "WP-S4") return simple(WorkpieceFamily::S, 45.0, 21.0, 10.0);
    if (name == "WP-S5") return simple(WorkpieceFamily::S, 60.0, 25.0, 10.0);
    throw std::invalid_argument("unknown workpiece '" + std::string(name) + "'");
}

std::vector<std::string> workpiece_names() {
    return {"WP-E1", "WP-E2", "WP-E3", "WP-T1", "WP-T2", "WP-S1", "WP-S2", "WP-S3", "WP-S4", "WP-S5"};
}

GeneratedWorkpiece gen_workpiece(const WorkpieceSpec& spec, std::uint64_t seed) {
    spec.validate();

    struct Layer {
        double x0, x1, r2;
    };
    std::vector<Layer> layers;
    double x = 0.0, rmax = 0.0, volume = 0.0;
    auto add = [&](const CylinderSegment& s) {
        const double r = s.diameter / 2.0;
        layers.push_back({x, x + s.height, r * r});
        x += s.height;
        rmax = std::max(rmax, r);
        volume += std::numbers::pi * r * r * s.height;
    };
    add(spec.base);
    for (const auto& s : spec.target) add(s);
    for (const auto& s : spec.removable) add(s);
    const double interface = spec.interface_height();

    const double s = spec.cell_size();
    const long nx = static_cast<long>(std::ceil(x / s));
    const long ny = static_cast<long>(std::ceil(rmax / s));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(0.02, 0.98);

    std::vector<Point3> all, kept;
    for (long i = 0; i < nx; ++i) {
        for (long j = -ny; j < ny; ++j) {
            for (long k = -ny; k < ny; ++k) {
                // draw for every cell so the sample pattern does not depend on the shape
                const Point3 p{s * (static_cast<double>(i) + jitter(rng)), s * (static_cast<double>(j) + jitter(rng)),
                               s * (static_cast<double>(k) + jitter(rng))};
                const double r2 = p.y() * p.y() + p.z() * p.z();
                const auto layer = std::find_if(layers.begin(), layers.end(),
                                                [&](const Layer& l) { return p.x() >= l.x0 && p.x() < l.x1; });
                if (layer == layers.end() || r2 > layer->r2) continue;
                all.push_back(p);
                if (p.x() < interface) kept.push_back(p);
            }
        }
    }
    if (all.empty() || kept.empty()) throw std::invalid_argument("workpiece geometry too small to sample");
    const double pv = volume / static_cast<double>(all.size());
    GeneratedWorkpiece out;
    out.initial = PointCloud(std::move(all), pv);
    out.target = PointCloud(std::move(kept), pv);
    out.cell_size = s;
    out.interface = {0.0, 0.0, interface};
    return out;
}

PointCloud observe(const PointCloud& cloud, double cell_size, int stride) {
    if (!(cell_size > 0.0) || stride < 1) throw std::invalid_argument("observation needs a positive cell size and stride");
    auto on_grid = [&](double v) {
        const long idx = static_cast<long>(std::floor(v / cell_size));
        return ((idx % stride) + stride) % stride == 0;
    };
    std::vector<Point3> pts;
    for (const auto& p : cloud.points()) {
        if (on_grid(p.x()) && on_grid(p.y()) && on_grid(p.z())) pts.push_back(p);
    }
    const double scale = static_cast<double>(stride) * stride * stride;
    return PointCloud(std::move(pts), cloud.point_volume() * scale);
}

}  // namespace decompgrind
