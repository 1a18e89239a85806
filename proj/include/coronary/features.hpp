#pragma once

#include <array>
#include <string>
#include <vector>

#include "coronary/geometry.hpp"
#include "coronary/labels.hpp"

namespace coronary {

inline constexpr std::size_t kFeatureCount = 14;

/// Per-segment network input, flattened as
/// [length, curvature, start.xyz, mid.xyz, end.xyz, centroid.xyz].
struct FeatureVector {
    std::array<double, kFeatureCount> values{};

    double length() const { return values[0]; }
    double curvature() const { return values[1]; }
    Point3 start() const { return point_at(2); }
    Point3 mid() const { return point_at(5); }
    Point3 end() const { return point_at(8); }
    Point3 centroid() const { return point_at(11); }

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

private:
    Point3 point_at(std::size_t offset) const { return {values[offset], values[offset + 1], values[offset + 2]}; }
};

FeatureVector make_feature_vector(double length, double curvature, const KeyPoints& keys, Point3 centroid);

struct SegmentFeatures {
    std::string segment_id;
    FeatureVector features;
    bool curvature_degenerate = false;
};

/// One row per segment in tree order. Voxel trees are converted to mm first.
std::vector<SegmentFeatures> extract_features(const CoronaryTree& tree);

struct LabelledExample {
    FeatureVector features;
    ArteryLabel label;
    std::string patient_id;
};

/// Throws SchemaError when any segment lacks a ground-truth label.
std::vector<LabelledExample> labelled_examples(const CoronaryTree& tree);

}  // namespace coronary
