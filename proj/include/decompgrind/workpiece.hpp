#pragma once

#include "decompgrind/geometry.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace decompgrind {

enum class WorkpieceFamily { E, T, S, Custom };

std::string_view to_string(WorkpieceFamily f);

struct CylinderSegment {
    double diameter = 0.0;  // mm
    double height = 0.0;    // mm
};

/// Coaxial cylinders stacked along +x (the grinding normal at zero tilt):
/// base first, then the target segments, then the removable segments.
struct WorkpieceSpec {
    std::string name = "custom";
    WorkpieceFamily family = WorkpieceFamily::Custom;
    CylinderSegment base{30.0, 5.0};
    std::vector<CylinderSegment> target;     // may be empty (WP-T, WP-S)
    std::vector<CylinderSegment> removable;  // must not be empty
    double density = 30.0;                   // infill percent
    double resolution = 8.0;                 // samples per mm^3

    void validate() const;
    /// x coordinate of the top of the kept material (base + target).
    [[nodiscard]] double interface_height() const;
    [[nodiscard]] double total_height() const;
    /// Lattice spacing implied by the resolution.
    [[nodiscard]] double cell_size() const;
};

/// Named workpieces: WP-E1..E3, WP-T1..T2, WP-S1..S5. Throws std::invalid_argument otherwise.
WorkpieceSpec named_workpiece(std::string_view name);
std::vector<std::string> workpiece_names();

struct GeneratedWorkpiece {
    PointCloud initial;
    PointCloud target;
    double cell_size = 0.0;
    /// Flat surface at the top of the kept material; the end of grinding for WP-T/WP-S.
    CuttingSurface interface;
};

/// Jittered-lattice sampling of the solid: one sample per lattice cell whose
/// sample falls inside, each uniformly placed in the inner 96 % of its cell.
/// Target samples are the initial samples below the interface, so target is a
/// subset of initial.
GeneratedWorkpiece gen_workpiece(const WorkpieceSpec& spec, std::uint64_t seed);

/// Simulated shape observation: keeps the samples whose lattice indices are all
/// multiples of `stride`. The point weight is scaled so the volume is kept.
PointCloud observe(const PointCloud& cloud, double cell_size, int stride = 2);

}  // namespace decompgrind
