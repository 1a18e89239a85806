#include "coronary/geometry.hpp"

#include <algorithm>
#include <limits>

#include "coronary/error.hpp"

namespace coronary {

namespace {

void require_mm(const Centerline& centerline, const char* op) {
    if (centerline.units != Units::mm) {
        throw UnitMismatchError(std::string(op) + ": segment '" + centerline.segment_id +
                                "' is in voxel units, expected mm");
    }
}

void require_two_points(const Centerline& centerline, const char* op) {
    if (centerline.points.size() < 2) {
        throw DegenerateInputError(std::string(op) + ": segment '" + centerline.segment_id +
                                   "' has fewer than two points");
    }
}

}  // namespace

std::string_view units_name(Units units) { return units == Units::mm ? "mm" : "voxel"; }

void ScanFrame::validate() const {
    for (double s : spacing) {
        if (!std::isfinite(s) || s <= 0.0) throw ConfigError("scan spacing must be finite and positive");
    }
    if (!origin.finite()) throw ConfigError("scan origin must be finite");
}

void Centerline::validate() const {
    require_two_points(*this, "centerline");
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!points[i].finite()) {
            throw DegenerateInputError("segment '" + segment_id + "' has a non-finite coordinate");
        }
        if (i > 0 && points[i] == points[i - 1]) {
            throw DegenerateInputError("segment '" + segment_id + "' repeats point " + std::to_string(i));
        }
    }
}

bool CoronaryTree::labelled() const {
    return !segments.empty() &&
           std::all_of(segments.begin(), segments.end(), [](const Segment& s) { return s.label.has_value(); });
}

Centerline to_physical(const Centerline& centerline, const ScanFrame& frame) {
    if (centerline.units != Units::voxel) {
        throw UnitMismatchError("to_physical: segment '" + centerline.segment_id + "' is already in mm");
    }
    frame.validate();
    Centerline out{centerline.segment_id, {}, Units::mm};
    out.points.reserve(centerline.points.size());
    for (const Point3& p : centerline.points) {
        out.points.push_back({p.x * frame.spacing[0], p.y * frame.spacing[1], p.z * frame.spacing[2]});
    }
    return out;
}

CoronaryTree to_physical(const CoronaryTree& tree) {
    if (tree.units == Units::mm) return tree;
    CoronaryTree out = tree;
    out.units = Units::mm;
    for (Segment& segment : out.segments) segment.centerline = to_physical(segment.centerline, tree.frame);
    return out;
}

std::vector<double> cumulative_length(std::span<const Point3> points) {
    std::vector<double> cumulative(points.size(), 0.0);
    for (std::size_t i = 1; i < points.size(); ++i) {
        cumulative[i] = cumulative[i - 1] + distance(points[i - 1], points[i]);
    }
    return cumulative;
}

double arc_length(const Centerline& centerline) {
    require_mm(centerline, "arc_length");
    require_two_points(centerline, "arc_length");
    return cumulative_length(centerline.points).back();
}

double menger_curvature(Point3 a, Point3 b, Point3 c) {
    const double ab = distance(a, b);
    const double bc = distance(b, c);
    const double ca = distance(c, a);
    const double denominator = ab * bc * ca;
    if (denominator == 0.0) return 0.0;
    // 4 * triangle area == 2 * |ab x ac|
    const double twice_area = norm(cross(b - a, c - a));
    // sin(angle at a) below rounding level: collinear up to representation error
    if (twice_area <= 16.0 * std::numeric_limits<double>::epsilon() * ab * ca) return 0.0;
    return 2.0 * twice_area / denominator;
}

CurvatureResult mean_curvature(const Centerline& centerline) {
    require_mm(centerline, "mean_curvature");
    const auto& pts = centerline.points;
    if (pts.size() < 3) return {0.0, true};
    double sum = 0.0;
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) sum += menger_curvature(pts[i - 1], pts[i], pts[i + 1]);
    return {sum / static_cast<double>(pts.size() - 2), false};
}

KeyPoints key_points(const Centerline& centerline) {
    require_mm(centerline, "key_points");
    require_two_points(centerline, "key_points");
    const auto& pts = centerline.points;
    const std::vector<double> cumulative = cumulative_length(pts);
    const double half = 0.5 * cumulative.back();

    // First vertex whose cumulative length reaches the half-way mark.
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), half);
    const auto k = static_cast<std::size_t>(std::distance(cumulative.begin(), it));
    Point3 mid = pts[k];
    if (k > 0 && cumulative[k] > half) {
        const double span = cumulative[k] - cumulative[k - 1];
        const double t = (half - cumulative[k - 1]) / span;
        mid = pts[k - 1] + (pts[k] - pts[k - 1]) * t;
    }
    return {pts.front(), mid, pts.back()};
}

Point3 tree_centroid(const CoronaryTree& tree) {
    Point3 sum{};
    std::size_t count = 0;
    for (const Segment& segment : tree.segments) {
        require_mm(segment.centerline, "tree_centroid");
        for (const Point3& p : segment.centerline.points) {
            sum = sum + p;
            ++count;
        }
    }
    if (count == 0) throw DegenerateInputError("tree_centroid: tree '" + tree.patient_id + "' has no points");
    return sum * (1.0 / static_cast<double>(count));
}

Projection project_onto(const Centerline& centerline, Point3 query) {
    require_mm(centerline, "project_onto");
    require_two_points(centerline, "project_onto");
    const auto& pts = centerline.points;
    Projection best{0.0, std::numeric_limits<double>::infinity(), pts.front()};
    double travelled = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const Point3 edge = pts[i] - pts[i - 1];
        const double length_sq = dot(edge, edge);
        const double t = std::clamp(dot(query - pts[i - 1], edge) / length_sq, 0.0, 1.0);
        const Point3 foot = pts[i - 1] + edge * t;
        const double d = distance(query, foot);
        const double length = std::sqrt(length_sq);
        if (d < best.distance) best = {travelled + t * length, d, foot};
        travelled += length;
    }
    return best;
}

}  // namespace coronary
