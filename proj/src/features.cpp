#include "coronary/features.hpp"

#include "coronary/error.hpp"

namespace coronary {

FeatureVector make_feature_vector(double length, double curvature, const KeyPoints& keys, Point3 centroid) {
    FeatureVector fv;
    fv.values[0] = length;
    fv.values[1] = curvature;
    std::size_t k = 2;
    for (Point3 p : {keys.start, keys.mid, keys.end, centroid}) {
        fv.values[k++] = p.x;
        fv.values[k++] = p.y;
        fv.values[k++] = p.z;
    }
    return fv;
}

std::vector<SegmentFeatures> extract_features(const CoronaryTree& input) {
    const CoronaryTree tree = to_physical(input);
    const Point3 centroid = tree_centroid(tree);

    std::vector<SegmentFeatures> rows;
    rows.reserve(tree.segments.size());
    for (const Segment& segment : tree.segments) {
        const Centerline& cl = segment.centerline;
        const CurvatureResult curvature = mean_curvature(cl);
        rows.push_back({cl.segment_id,
                        make_feature_vector(arc_length(cl), curvature.value, key_points(cl), centroid),
                        curvature.degenerate});
    }
    return rows;
}

std::vector<LabelledExample> labelled_examples(const CoronaryTree& tree) {
    const auto rows = extract_features(tree);
    std::vector<LabelledExample> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const MaybeLabel& label = tree.segments[i].label;
        if (!label) {
            throw SchemaError("tree '" + tree.patient_id + "' segment '" + rows[i].segment_id +
                              "' has no ground-truth label");
        }
        out.push_back({rows[i].features, *label, tree.patient_id});
    }
    return out;
}

}  // namespace coronary
