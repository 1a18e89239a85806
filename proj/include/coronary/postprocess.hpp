#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coronary/geometry.hpp"
#include "coronary/labels.hpp"
#include "coronary/network.hpp"

namespace coronary {

struct PostConfig {
    double ri_threshold = 3.0;  // mm, LM end to RI start

    void validate() const;
};

enum class Side { right, left };

/// Which rule fixed a segment's final label.
enum class AuditStep {
    right_main,   // RCA / AM from the right set
    left_main,    // LM / LAD / LCx from the left set
    ramus,        // RI distance gate
    diagonal,     // D series ordered along the LAD
    marginal,     // OM series ordered along the LCx
    septal,
    reassigned,   // displaced segment moved to a free compatible label
    unassigned,
    raw,          // argmax label, rules bypassed
};

std::string_view audit_step_name(AuditStep step);

struct LabelAssignment {
    std::vector<std::string> segment_ids;
    std::vector<MaybeLabel> labels;
    std::vector<AuditStep> steps;
    std::vector<Side> sides;
    std::vector<bool> ri_rejected;  // RI prediction failed the distance gate
    std::vector<std::string> warnings;

    MaybeLabel label_of(std::string_view segment_id) const;
};

/// Geometry the rules need, computed once per tree (mm frame).
struct TreeGeometry {
    CoronaryTree tree;  // mm
    Point3 centroid;
    std::vector<Point3> starts;
    std::vector<Point3> mids;
    std::vector<Point3> ends;

    explicit TreeGeometry(const CoronaryTree& input);
    std::size_t size() const { return starts.size(); }
};

struct SidePartition {
    std::vector<std::size_t> right;
    std::vector<std::size_t> left;
};

/// Right iff midpoint x < centroid x; ties go left.
SidePartition split_left_right(std::span<const Point3> midpoints, Point3 centroid);

/// Candidate with the highest probability for `label`; ties go to the lowest
/// segment index. Empty set yields nullopt.
std::optional<std::size_t> assign_unique_max(std::span<const std::size_t> candidates,
                                             std::span<const ProbVector> probs, ArteryLabel label);

struct RiResolution {
    std::optional<std::size_t> ri;
    std::vector<std::size_t> rejected;  // re-predicted as D1 or OM1
    std::vector<std::size_t> losers;    // passed the gate but lost the argmax
};

/// Distance gate on RI-predicted left segments. Rejected segments have their
/// entry in `predictions` replaced by D1 (P^D1 >= P^OM1) or OM1. Without an
/// LM every candidate is rejected.
RiResolution resolve_ri(std::span<const std::size_t> left_set, std::vector<MaybeLabel>& predictions,
                        std::span<const ProbVector> probs, std::span<const Point3> starts,
                        std::optional<Point3> lm_end, const PostConfig& config);

enum class Series { diagonal, marginal };

struct SeriesKey {
    double position = 0.0;   // arc position of the branch start projected on the parent
    double lm_distance = 0.0;  // branch start to LM end; 0 when LM is unknown
    std::size_t index = 0;

    friend bool operator<(const SeriesKey& a, const SeriesKey& b) {
        if (a.position != b.position) return a.position < b.position;
        if (a.lm_distance != b.lm_distance) return a.lm_distance < b.lm_distance;
        return a.index < b.index;
    }
};

SeriesKey series_key(std::size_t segment, const Centerline& parent, std::span<const Point3> starts,
                     std::optional<Point3> lm_end);

struct SeriesResult {
    std::vector<std::pair<std::size_t, ArteryLabel>> assigned;
    std::vector<std::size_t> displaced;  // overflow beyond three, or duplicate raw claims
    std::optional<std::string> warning;
};

/// Orders the series members proximal-first along `parent` and numbers them
/// 1..3. With more than three members the three with the largest summed
/// series probability are kept. With no parent, raw labels are kept and
/// duplicate claims resolved by argmax.
SeriesResult order_branch_series(std::span<const std::size_t> branch_set, std::span<const MaybeLabel> predictions,
                                 std::span<const ProbVector> probs, std::span<const Point3> starts,
                                 const Centerline* parent, std::optional<Point3> lm_end, Series series);

/// Full rule-based correction of raw per-segment predictions.
/// `predictions` may hold nullopt for segments without a raw label.
LabelAssignment apply_constraints(const CoronaryTree& tree, std::span<const MaybeLabel> predictions,
                                  std::span<const ProbVector> probs, const PostConfig& config = {});

LabelAssignment apply_constraints(const CoronaryTree& tree, std::span<const ProbVector> probs,
                                  const PostConfig& config = {});

/// Raw labelling (argmax of each vector) in LabelAssignment form.
LabelAssignment raw_assignment(const CoronaryTree& tree, std::span<const ProbVector> probs);

}  // namespace coronary
