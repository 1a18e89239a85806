#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "coronary/geometry.hpp"

namespace coronary::test {

inline Centerline line(std::vector<Point3> points, std::string id = "s") {
    return Centerline{std::move(id), std::move(points), Units::mm};
}

inline CoronaryTree tree_of(std::vector<Centerline> lines, std::string id = "p") {
    CoronaryTree tree;
    tree.patient_id = std::move(id);
    for (auto& l : lines) tree.segments.push_back(Segment{std::move(l), std::nullopt});
    return tree;
}

/// `n` points on a circle of radius r in the xy plane spanning `angle` radians.
inline Centerline arc(double r, std::size_t n, double angle, Point3 centre = {}) {
    std::vector<Point3> pts;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = angle * static_cast<double>(i) / static_cast<double>(n - 1);
        pts.push_back(centre + Point3{r * std::cos(t), r * std::sin(t), 0.0});
    }
    return line(std::move(pts), "arc");
}

inline bool near(Point3 a, Point3 b, double tol = 1e-12) { return distance(a, b) <= tol; }

}  // namespace coronary::test
