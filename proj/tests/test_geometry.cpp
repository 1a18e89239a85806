#include <doctest.h>

#include <algorithm>
#include <random>

#include "coronary/error.hpp"
#include "support.hpp"

using namespace coronary;
using namespace coronary::test;

namespace {

Point3 rotate(Point3 p, double yaw, double pitch) {
    const Point3 a{std::cos(yaw) * p.x - std::sin(yaw) * p.y, std::sin(yaw) * p.x + std::cos(yaw) * p.y, p.z};
    return {a.x, std::cos(pitch) * a.y - std::sin(pitch) * a.z, std::sin(pitch) * a.y + std::cos(pitch) * a.z};
}

Centerline random_polyline(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    std::vector<Point3> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back({u(rng), u(rng), u(rng)});
    return line(pts);
}

}  // namespace

TEST_CASE("to_physical scales voxel coordinates componentwise") {
    ScanFrame frame{{0.5, 0.5, 0.6}, {}};
    Centerline c{"a", {{0, 0, 0}, {2, 4, 10}}, Units::voxel};
    const Centerline mm = to_physical(c, frame);
    CHECK(mm.units == Units::mm);
    CHECK(mm.points[0] == Point3{0, 0, 0});
    CHECK(near(mm.points[1], {1.0, 2.0, 6.0}));

    Centerline unit{"b", {{1, 1, 1}, {2, 2, 2}}, Units::voxel};
    CHECK(to_physical(unit, ScanFrame{}).points[0] == Point3{1, 1, 1});

    CHECK_THROWS_AS(to_physical(mm, frame), UnitMismatchError);
}

TEST_CASE("to_physical on a tree converts every segment and leaves mm trees alone") {
    CoronaryTree tree = tree_of({line({{0, 0, 0}, {2, 2, 2}}), line({{1, 0, 0}, {4, 0, 0}})});
    CHECK(to_physical(tree).segments[1].centerline.points[1] == Point3{4, 0, 0});
    tree.units = Units::voxel;
    tree.frame.spacing = {2.0, 1.0, 1.0};
    for (auto& s : tree.segments) s.centerline.units = Units::voxel;
    const CoronaryTree mm = to_physical(tree);
    CHECK(mm.units == Units::mm);
    CHECK(mm.segments[1].centerline.points[1] == Point3{8, 0, 0});
}

TEST_CASE("scan frame and centerline validation") {
    CHECK_THROWS_AS((ScanFrame{{0.5, 0.0, 1.0}, {}}.validate()), ConfigError);
    CHECK_THROWS_AS((ScanFrame{{0.5, -1.0, 1.0}, {}}.validate()), ConfigError);
    CHECK_NOTHROW(ScanFrame{}.validate());
    CHECK_THROWS_AS(line({{0, 0, 0}}).validate(), DegenerateInputError);
    CHECK_THROWS_AS(line({{0, 0, 0}, {0, 0, 0}}).validate(), DegenerateInputError);
    CHECK_THROWS_AS(line({{0, 0, 0}, {NAN, 0, 0}}).validate(), DegenerateInputError);
}

TEST_CASE("arc length") {
    CHECK(arc_length(line({{0, 0, 0}, {3, 0, 0}, {3, 4, 0}})) == 7.0);
    CHECK(arc_length(line({{0, 0, 0}, {1, 0, 0}})) == 1.0);
    CHECK(arc_length(arc(10.0, 100, std::numbers::pi)) == doctest::Approx(std::numbers::pi * 10.0).epsilon(1e-3));
    CHECK_THROWS_AS(arc_length(line({{0, 0, 0}})), DegenerateInputError);

    const auto cum = cumulative_length(std::vector<Point3>{{0, 0, 0}, {3, 0, 0}, {3, 4, 0}});
    CHECK(cum == std::vector<double>{0.0, 3.0, 7.0});
}

TEST_CASE("arc length is invariant under rigid motion") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> angle(-3.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        const Centerline c = random_polyline(rng, 12);
        const double yaw = angle(rng), pitch = angle(rng);
        const Point3 shift{angle(rng) * 10, angle(rng) * 10, angle(rng) * 10};
        std::vector<Point3> moved;
        for (Point3 p : c.points) moved.push_back(rotate(p, yaw, pitch) + shift);
        CHECK(arc_length(line(moved)) == doctest::Approx(arc_length(c)).epsilon(1e-9));
    }
}

TEST_CASE("Menger curvature recovers 1/R on sampled circles") {
    for (double r : {2.0, 5.0, 10.0}) {
        const CurvatureResult k = mean_curvature(arc(r, 40, std::numbers::pi));
        CHECK_FALSE(k.degenerate);
        CHECK(k.value == doctest::Approx(1.0 / r).epsilon(1e-2));
    }
    CHECK(menger_curvature({0, 0, 0}, {1, 0, 0}, {2, 0, 0}) == 0.0);
    CHECK(mean_curvature(line({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}})).value == 0.0);
    // right angle on the unit square corner: circumradius sqrt(2)/2
    CHECK(menger_curvature({1, 0, 0}, {0, 0, 0}, {0, 1, 0}) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("curvature of fewer than three points is zero and flagged") {
    const CurvatureResult k = mean_curvature(line({{0, 0, 0}, {1, 1, 0}}));
    CHECK(k.value == 0.0);
    CHECK(k.degenerate);
}

TEST_CASE("mean curvature is rigid-invariant and scales as 1/s") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const Centerline c = random_polyline(rng, 8);
        const double base = mean_curvature(c).value;
        std::vector<Point3> moved, scaled;
        for (Point3 p : c.points) {
            moved.push_back(rotate(p, 0.7, -1.3) + Point3{5, -2, 9});
            scaled.push_back(p * 3.0);
        }
        CHECK(mean_curvature(line(moved)).value == doctest::Approx(base).epsilon(1e-9));
        CHECK(mean_curvature(line(scaled)).value == doctest::Approx(base / 3.0).epsilon(1e-9));
        CHECK(base >= 0.0);
    }
}

TEST_CASE("key points") {
    KeyPoints k = key_points(line({{0, 0, 0}, {10, 0, 0}}));
    CHECK(k.start == Point3{0, 0, 0});
    CHECK(k.mid == Point3{5, 0, 0});
    CHECK(k.end == Point3{10, 0, 0});
    CHECK(key_points(line({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}})).mid == Point3{1, 0, 0});
    CHECK(near(key_points(line({{0, 0, 0}, {4, 0, 0}, {4, 2, 0}})).mid, {3, 0, 0}));
    CHECK_THROWS_AS(key_points(line({{1, 2, 3}})), DegenerateInputError);
}

TEST_CASE("tree centroid") {
    CHECK(tree_centroid(tree_of({line({{0, 0, 0}, {2, 0, 0}})})) == Point3{1, 0, 0});
    CHECK(tree_centroid(tree_of({line({{0, 0, 0}, {0, 2, 0}}), line({{2, 0, 0}, {2, 2, 0}})})) == Point3{1, 1, 0});
    CHECK_THROWS(tree_centroid(CoronaryTree{}));

    std::mt19937_64 rng(3);
    CoronaryTree t = tree_of({random_polyline(rng, 5), random_polyline(rng, 9), random_polyline(rng, 3)});
    const Point3 c = tree_centroid(t);
    const Point3 v{3.5, -7.25, 12.0};
    CoronaryTree shifted = t;
    for (auto& s : shifted.segments)
        for (auto& p : s.centerline.points) p = p + v;
    CHECK(near(tree_centroid(shifted), c + v, 1e-9));
    std::reverse(t.segments.begin(), t.segments.end());
    CHECK(near(tree_centroid(t), c, 1e-12));
}

TEST_CASE("projection onto a polyline") {
    const Centerline parent = line({{0, 0, 0}, {10, 0, 0}, {10, 10, 0}});
    Projection p = project_onto(parent, {4, 3, 0});
    CHECK(p.arc_position == doctest::Approx(4.0));
    CHECK(p.distance == doctest::Approx(3.0));
    p = project_onto(parent, {12, 6, 0});
    CHECK(p.arc_position == doctest::Approx(16.0));
    CHECK(p.foot == Point3{10, 6, 0});
    p = project_onto(parent, {-5, 0, 0});
    CHECK(p.arc_position == 0.0);
    // equidistant from both legs: ties go to the smaller arc position
    p = project_onto(line({{0, 0, 0}, {10, 0, 0}, {10, 10, 0}}), {12, -2, 0});
    CHECK(p.arc_position == doctest::Approx(10.0));
}
