#include "coronary/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "coronary/error.hpp"
#include "coronary/network.hpp"
#include "coronary/postprocess.hpp"
#include "coronary/util.hpp"

namespace coronary {

void GenConfig::validate() const {
    const BranchPresence& p = presence;
    for (double v : {p.ri, p.d2, p.d3, p.om2, p.om3, p.sep, p.am}) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("presence probabilities must lie in [0, 1]");
    }
    if (!(min_scale > 0.0 && max_scale >= min_scale)) throw ConfigError("scale range must be positive and ordered");
    if (!(wiggle >= 0.0) || !(direction_jitter >= 0.0) || !(rotation_jitter_deg >= 0.0)) {
        throw ConfigError("jitter amplitudes must be non-negative");
    }
    if (!(ostium_offset > 0.0) || !(sample_step > 0.0)) throw ConfigError("offset and sample step must be positive");
}

namespace {

Point3 normalized(Point3 v) { return v * (1.0 / norm(v)); }

class TreeBuilder {
public:
    TreeBuilder(const GenConfig& config, Rng& rng) : config_(config), rng_(rng) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    bool chance(double p) { return uniform(0.0, 1.0) < p; }

    Point3 jitter_direction(Point3 d) {
        const double a = config_.direction_jitter;
        return normalized(d + Point3{uniform(-a, a), uniform(-a, a), uniform(-a, a)});
    }

    /// Integrates a tangent that turns from `d0` to `d1` with a sinusoidal wobble.
    std::vector<Point3> grow(Point3 start, Point3 d0, Point3 d1, double length) {
        d0 = jitter_direction(d0);
        d1 = jitter_direction(d1);
        Point3 helper{uniform(-1, 1), uniform(-1, 1), uniform(-1, 1)};
        Point3 side = cross(d0, helper);
        if (norm(side) < 1e-6) side = cross(d0, Point3{0, 0, 1});
        side = normalized(side);
        const double cycles = uniform(0.5, 1.5);
        const double phase = uniform(0.0, 2.0 * std::numbers::pi);
        const double amplitude = config_.wiggle * uniform(0.5, 1.0);

        std::vector<Point3> points{start};
        double s = 0.0;
        Point3 p = start;
        while (s < length) {
            const double ds = config_.sample_step * uniform(0.75, 1.25);
            const double u = std::min(1.0, (s + 0.5 * ds) / length);
            Point3 tangent = normalized(d0 * (1.0 - u) + d1 * u);
            tangent = normalized(tangent + side * (amplitude * std::sin(2.0 * std::numbers::pi * cycles * u + phase)));
            p = p + tangent * ds;
            s += ds;
            points.push_back(p);
        }
        return points;
    }

    Point3 random_unit() {
        for (;;) {
            const Point3 v{uniform(-1, 1), uniform(-1, 1), uniform(-1, 1)};
            const double n = norm(v);
            if (n > 1e-3 && n <= 1.0) return v * (1.0 / n);
        }
    }

    const GenConfig& config() const { return config_; }

private:
    const GenConfig& config_;
    Rng& rng_;
};

/// Vertex of `points` nearest to the given fraction of arc length.
Point3 attach_point(const std::vector<Point3>& points, double fraction) {
    const std::vector<double> cumulative = cumulative_length(points);
    const double target = fraction * cumulative.back();
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), target);
    auto k = static_cast<std::size_t>(std::distance(cumulative.begin(), it));
    k = std::clamp<std::size_t>(k, 1, points.size() - 2);
    return points[k];
}

struct RawBranch {
    ArteryLabel label;
    std::vector<Point3> points;  // local mm frame
};

/// Which optional branches a tree has. Drawn once per tree so that geometry
/// retries cannot skew branch frequencies.
struct Topology {
    bool ri = false;
    bool sep = false;
    bool am = false;
    int diagonals = 1;
    int marginals = 1;
};

Topology draw_topology(const BranchPresence& presence, Rng& rng) {
    auto chance = [&](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };
    Topology t;
    t.ri = chance(presence.ri);
    t.sep = chance(presence.sep);
    t.diagonals = 1 + (chance(presence.d2) ? 1 + (chance(presence.d3) ? 1 : 0) : 0);
    t.marginals = 1 + (chance(presence.om2) ? 1 + (chance(presence.om3) ? 1 : 0) : 0);
    t.am = chance(presence.am);
    return t;
}

std::vector<RawBranch> build_anatomy(TreeBuilder& b, const Topology& topology) {
    const double scale = b.uniform(b.config().min_scale, b.config().max_scale);
    const double offset = b.config().ostium_offset;
    auto len = [&](double lo, double hi) { return scale * b.uniform(lo, hi); };
    auto jitter_point = [&](Point3 p, double r) {
        return p + Point3{b.uniform(-r, r), b.uniform(-r, r), b.uniform(-r, r)};
    };

    std::vector<RawBranch> out;

    // Left coronary tree (positive x).
    const Point3 left_ostium = jitter_point({offset, 0.0, 0.0}, 1.5);
    auto lm = b.grow(left_ostium, {1.0, 0.2, -0.05}, {1.0, 0.1, -0.15}, len(10.0, 16.0));
    const Point3 lm_end = lm.back();
    auto lad = b.grow(lm_end, {0.15, 0.8, -0.55}, {0.05, 0.4, -0.9}, len(100.0, 140.0));
    auto lcx = b.grow(lm_end, {0.45, -0.7, -0.3}, {0.0, -0.85, -0.5}, len(55.0, 85.0));

    out.push_back({ArteryLabel::LM, lm});
    out.push_back({ArteryLabel::LAD, lad});
    out.push_back({ArteryLabel::LCx, lcx});

    if (topology.ri) {
        const Point3 gap = b.random_unit() * b.uniform(0.3, 2.0);
        out.push_back({ArteryLabel::RI, b.grow(lm_end + gap, {0.7, 0.1, -0.7}, {0.45, 0.0, -0.88}, len(30.0, 55.0))});
    }

    if (topology.sep) {
        out.push_back({ArteryLabel::Sep, b.grow(attach_point(lad, b.uniform(0.08, 0.2)), {-0.15, -0.5, -0.85},
                                                {0.0, -0.3, -0.95}, len(15.0, 35.0))});
    }

    const int diagonals = topology.diagonals;
    const std::array<std::pair<double, double>, 3> d_pos{{{0.15, 0.28}, {0.38, 0.52}, {0.60, 0.75}}};
    const std::array<std::pair<double, double>, 3> d_len{{{40.0, 65.0}, {30.0, 55.0}, {20.0, 45.0}}};
    for (int k = 0; k < diagonals; ++k) {
        const auto [lo, hi] = d_pos[static_cast<std::size_t>(k)];
        const auto [llo, lhi] = d_len[static_cast<std::size_t>(k)];
        out.push_back({label_at(index_of(ArteryLabel::D1) + static_cast<std::size_t>(k)),
                       b.grow(attach_point(lad, b.uniform(lo, hi)), {0.45, 0.3, -0.8}, {0.25, 0.2, -0.93},
                              len(llo, lhi))});
    }

    const int marginals = topology.marginals;
    const std::array<std::pair<double, double>, 3> om_pos{{{0.15, 0.30}, {0.42, 0.58}, {0.68, 0.82}}};
    const std::array<std::pair<double, double>, 3> om_len{{{35.0, 60.0}, {28.0, 50.0}, {20.0, 40.0}}};
    for (int k = 0; k < marginals; ++k) {
        const auto [lo, hi] = om_pos[static_cast<std::size_t>(k)];
        const auto [llo, lhi] = om_len[static_cast<std::size_t>(k)];
        out.push_back({label_at(index_of(ArteryLabel::OM1) + static_cast<std::size_t>(k)),
                       b.grow(attach_point(lcx, b.uniform(lo, hi)), {0.3, -0.35, -0.88}, {0.15, -0.2, -0.95},
                              len(llo, lhi))});
    }

    // Right coronary tree (negative x).
    const Point3 right_ostium = jitter_point({-offset, 3.0, 0.0}, 1.5);
    auto rca = b.grow(right_ostium, {-0.9, 0.4, -0.15}, {-0.3, -0.3, -0.9}, len(100.0, 150.0));
    if (topology.am) {
        out.push_back({ArteryLabel::AM, b.grow(attach_point(rca, b.uniform(0.45, 0.65)), {0.3, 0.6, -0.75},
                                               {0.2, 0.3, -0.93}, len(25.0, 50.0))});
    }
    out.push_back({ArteryLabel::RCA, std::move(rca)});
    return out;
}

bool consistent(const CoronaryTree& voxel_tree, const PostConfig& post) {
    const TreeGeometry geo(voxel_tree);
    const auto& segments = geo.tree.segments;
    std::array<std::optional<std::size_t>, kLabelCount> where{};
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const ArteryLabel label = *segments[i].label;
        where[index_of(label)] = i;
        const bool right = geo.mids[i].x < geo.centroid.x;
        if (right != is_right_label(label)) return false;
    }
    const std::size_t lm = *where[index_of(ArteryLabel::LM)];
    if (const auto ri = where[index_of(ArteryLabel::RI)]) {
        if (!(distance(geo.starts[*ri], geo.ends[lm]) < post.ri_threshold)) return false;
    }
    auto ordered = [&](ArteryLabel parent, ArteryLabel first) {
        const Centerline& p = segments[*where[index_of(parent)]].centerline;
        std::optional<SeriesKey> previous;
        for (std::size_t k = 0; k < 3; ++k) {
            const auto member = where[index_of(first) + k];
            if (!member) break;
            const SeriesKey key = series_key(*member, p, geo.starts, geo.ends[lm]);
            if (previous && !(*previous < key)) return false;
            previous = key;
        }
        return true;
    };
    return ordered(ArteryLabel::LAD, ArteryLabel::D1) && ordered(ArteryLabel::LCx, ArteryLabel::OM1);
}

CoronaryTree realise(const GenConfig& config, std::uint64_t index, const Topology& topology, Rng& rng) {
    TreeBuilder builder(config, rng);
    std::vector<RawBranch> branches = build_anatomy(builder, topology);

    // Pose the heart: small rotation about the aortic root, then place it in the scan.
    const double jitter = config.rotation_jitter_deg * std::numbers::pi / 180.0;
    const Eigen::Matrix3d rotation =
        (Eigen::AngleAxisd(builder.uniform(-jitter, jitter), Eigen::Vector3d::UnitZ()) *
         Eigen::AngleAxisd(builder.uniform(-jitter, jitter), Eigen::Vector3d::UnitY()) *
         Eigen::AngleAxisd(builder.uniform(-jitter, jitter), Eigen::Vector3d::UnitX()))
            .toRotationMatrix();
    const Eigen::Vector3d root{builder.uniform(85.0, 115.0), builder.uniform(95.0, 125.0), builder.uniform(75.0, 105.0)};

    ScanFrame frame;
    const double in_plane = builder.uniform(0.3, 0.5);
    frame.spacing = {in_plane, in_plane, builder.uniform(0.4, 0.8)};
    frame.origin = {builder.uniform(-150.0, -50.0), builder.uniform(-150.0, -50.0), builder.uniform(-250.0, -100.0)};

    std::shuffle(branches.begin(), branches.end(), rng);

    CoronaryTree tree;
    tree.patient_id = "synth_" + std::to_string(config.seed) + "_" + std::to_string(index);
    tree.units = Units::voxel;
    tree.frame = frame;
    for (std::size_t k = 0; k < branches.size(); ++k) {
        Segment segment;
        segment.label = branches[k].label;
        segment.centerline.segment_id = "seg_" + std::string(k < 10 ? "0" : "") + std::to_string(k);
        segment.centerline.units = Units::voxel;
        for (const Point3& p : branches[k].points) {
            const Eigen::Vector3d mm = rotation * Eigen::Vector3d{p.x, p.y, p.z} + root;
            segment.centerline.points.push_back(
                {mm.x() / frame.spacing[0], mm.y() / frame.spacing[1], mm.z() / frame.spacing[2]});
        }
        tree.segments.push_back(std::move(segment));
    }
    return tree;
}

}  // namespace

CoronaryTree generate_tree(const GenConfig& config, std::uint64_t index) {
    config.validate();
    const std::uint64_t tree_seed = derive_seed(config.seed, index);
    Rng topology_rng(tree_seed);
    const Topology topology = draw_topology(config.presence, topology_rng);
    constexpr std::uint64_t kMaxAttempts = 64;
    for (std::uint64_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
        Rng rng(derive_seed(tree_seed, attempt));
        CoronaryTree tree = realise(config, index, topology, rng);
        if (consistent(tree, PostConfig{})) return tree;
    }
    throw ConfigError("generator could not produce an anatomically consistent tree for index " +
                      std::to_string(index));
}

}  // namespace coronary
