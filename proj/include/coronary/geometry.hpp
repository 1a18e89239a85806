#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coronary/labels.hpp"

namespace coronary {

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend constexpr Point3 operator+(Point3 a, Point3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend constexpr Point3 operator-(Point3 a, Point3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend constexpr Point3 operator*(Point3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
    friend constexpr Point3 operator*(double s, Point3 a) { return a * s; }
    friend constexpr bool operator==(Point3 a, Point3 b) = default;

    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

constexpr double dot(Point3 a, Point3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Point3 cross(Point3 a, Point3 b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Point3 a) { return std::sqrt(dot(a, a)); }
inline double distance(Point3 a, Point3 b) { return norm(a - b); }

enum class Units { voxel, mm };

std::string_view units_name(Units units);

struct ScanFrame {
    std::array<double, 3> spacing{1.0, 1.0, 1.0};  // mm per voxel
    Point3 origin{};                                // world position of voxel (0,0,0), mm

    /// Throws ConfigError unless every spacing component is finite and positive.
    void validate() const;
};

struct Centerline {
    std::string segment_id;
    std::vector<Point3> points;
    Units units = Units::mm;

    /// Throws DegenerateInputError on fewer than two points, non-finite
    /// coordinates or repeated consecutive points.
    void validate() const;
};

struct Segment {
    Centerline centerline;
    MaybeLabel label;  // ground truth, when known
};

/// One patient's centerlines, all in the same units.
struct CoronaryTree {
    std::string patient_id;
    Units units = Units::mm;
    ScanFrame frame;
    std::vector<Segment> segments;

    bool labelled() const;
};

Centerline to_physical(const Centerline& centerline, const ScanFrame& frame);

/// Converts every segment; a tree already in mm is returned unchanged.
CoronaryTree to_physical(const CoronaryTree& tree);

double arc_length(const Centerline& centerline);

/// Cumulative arc length at each vertex; front() == 0, back() == arc_length.
std::vector<double> cumulative_length(std::span<const Point3> points);

struct CurvatureResult {
    double value = 0.0;      // 1/mm
    bool degenerate = false; // fewer than three points
};

/// Mean discrete Menger curvature over interior vertex triplets.
CurvatureResult mean_curvature(const Centerline& centerline);

/// Menger curvature of the circle through a, b, c; 0 for collinear triplets.
double menger_curvature(Point3 a, Point3 b, Point3 c);

struct KeyPoints {
    Point3 start;
    Point3 mid;  // at half the arc length
    Point3 end;
};

KeyPoints key_points(const Centerline& centerline);

/// Mean of every centerline point across all segments.
Point3 tree_centroid(const CoronaryTree& tree);

struct Projection {
    double arc_position = 0.0;  // arc length from the first vertex to the foot point
    double distance = 0.0;      // from the query point to the foot point
    Point3 foot;
};

/// Closest point on the polyline to `query`. Ties go to the smaller arc position.
Projection project_onto(const Centerline& centerline, Point3 query);

}  // namespace coronary
