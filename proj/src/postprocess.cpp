#include "coronary/postprocess.hpp"

#include <algorithm>
#include <array>

#include "coronary/error.hpp"

namespace coronary {

void PostConfig::validate() const {
    if (!(ri_threshold > 0.0) || !std::isfinite(ri_threshold)) throw ConfigError("ri_threshold must be positive");
}

std::string_view audit_step_name(AuditStep step) {
    switch (step) {
        case AuditStep::right_main: return "right_main";
        case AuditStep::left_main: return "left_main";
        case AuditStep::ramus: return "ramus";
        case AuditStep::diagonal: return "diagonal";
        case AuditStep::marginal: return "marginal";
        case AuditStep::septal: return "septal";
        case AuditStep::reassigned: return "reassigned";
        case AuditStep::unassigned: return "unassigned";
        case AuditStep::raw: return "raw";
    }
    return "unknown";
}

MaybeLabel LabelAssignment::label_of(std::string_view segment_id) const {
    for (std::size_t i = 0; i < segment_ids.size(); ++i) {
        if (segment_ids[i] == segment_id) return labels[i];
    }
    throw Error("unknown segment id '" + std::string(segment_id) + "'");
}

TreeGeometry::TreeGeometry(const CoronaryTree& input) : tree(to_physical(input)), centroid(tree_centroid(tree)) {
    for (const Segment& segment : tree.segments) {
        const KeyPoints keys = key_points(segment.centerline);
        starts.push_back(keys.start);
        mids.push_back(keys.mid);
        ends.push_back(keys.end);
    }
}

SidePartition split_left_right(std::span<const Point3> midpoints, Point3 centroid) {
    SidePartition partition;
    for (std::size_t i = 0; i < midpoints.size(); ++i) {
        (midpoints[i].x < centroid.x ? partition.right : partition.left).push_back(i);
    }
    return partition;
}

std::optional<std::size_t> assign_unique_max(std::span<const std::size_t> candidates,
                                             std::span<const ProbVector> probs, ArteryLabel label) {
    std::optional<std::size_t> best;
    for (std::size_t i : candidates) {
        const double p = probs[i][index_of(label)];
        if (!best || p > probs[*best][index_of(label)] || (p == probs[*best][index_of(label)] && i < *best)) {
            best = i;
        }
    }
    return best;
}

RiResolution resolve_ri(std::span<const std::size_t> left_set, std::vector<MaybeLabel>& predictions,
                        std::span<const ProbVector> probs, std::span<const Point3> starts,
                        std::optional<Point3> lm_end, const PostConfig& config) {
    RiResolution result;
    std::vector<std::size_t> survivors;
    for (std::size_t i : left_set) {
        if (predictions[i] != ArteryLabel::RI) continue;
        if (lm_end && distance(starts[i], *lm_end) < config.ri_threshold) {
            survivors.push_back(i);
        } else {
            const ProbVector& p = probs[i];
            predictions[i] = p[index_of(ArteryLabel::D1)] >= p[index_of(ArteryLabel::OM1)] ? ArteryLabel::D1
                                                                                          : ArteryLabel::OM1;
            result.rejected.push_back(i);
        }
    }
    result.ri = assign_unique_max(survivors, probs, ArteryLabel::RI);
    for (std::size_t i : survivors) {
        if (i != *result.ri) result.losers.push_back(i);
    }
    return result;
}

namespace {

constexpr std::array<ArteryLabel, 3> kDiagonals{ArteryLabel::D1, ArteryLabel::D2, ArteryLabel::D3};
constexpr std::array<ArteryLabel, 3> kMarginals{ArteryLabel::OM1, ArteryLabel::OM2, ArteryLabel::OM3};

const std::array<ArteryLabel, 3>& series_labels(Series series) {
    return series == Series::diagonal ? kDiagonals : kMarginals;
}

bool in_series(MaybeLabel label, Series series) {
    return label && (series == Series::diagonal ? is_diagonal(*label) : is_marginal(*label));
}

double series_mass(const ProbVector& p, Series series) {
    double mass = 0.0;
    for (ArteryLabel l : series_labels(series)) mass += p[index_of(l)];
    return mass;
}

}  // namespace

SeriesKey series_key(std::size_t segment, const Centerline& parent, std::span<const Point3> starts,
                     std::optional<Point3> lm_end) {
    return {project_onto(parent, starts[segment]).arc_position, lm_end ? distance(starts[segment], *lm_end) : 0.0,
            segment};
}

SeriesResult order_branch_series(std::span<const std::size_t> branch_set, std::span<const MaybeLabel> predictions,
                                 std::span<const ProbVector> probs, std::span<const Point3> starts,
                                 const Centerline* parent, std::optional<Point3> lm_end, Series series) {
    SeriesResult result;
    if (branch_set.empty()) return result;
    const auto& labels = series_labels(series);

    if (!parent) {
        result.warning = std::string(series == Series::diagonal ? "LAD" : "LCx") +
                         " missing: branch series kept as predicted";
        for (ArteryLabel label : labels) {
            std::vector<std::size_t> claimants;
            for (std::size_t i : branch_set) {
                if (predictions[i] == label) claimants.push_back(i);
            }
            const auto winner = assign_unique_max(claimants, probs, label);
            if (!winner) continue;
            result.assigned.emplace_back(*winner, label);
            for (std::size_t i : claimants) {
                if (i != *winner) result.displaced.push_back(i);
            }
        }
        std::sort(result.displaced.begin(), result.displaced.end());
        return result;
    }

    std::vector<std::size_t> kept(branch_set.begin(), branch_set.end());
    if (kept.size() > labels.size()) {
        std::stable_sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) {
            const double ma = series_mass(probs[a], series);
            const double mb = series_mass(probs[b], series);
            return ma != mb ? ma > mb : a < b;
        });
        result.displaced.assign(kept.begin() + static_cast<std::ptrdiff_t>(labels.size()), kept.end());
        std::sort(result.displaced.begin(), result.displaced.end());
        kept.resize(labels.size());
    }

    std::vector<SeriesKey> keys;
    for (std::size_t i : kept) keys.push_back(series_key(i, *parent, starts, lm_end));
    std::sort(keys.begin(), keys.end());
    for (std::size_t k = 0; k < keys.size(); ++k) result.assigned.emplace_back(keys[k].index, labels[k]);
    return result;
}

namespace {

/// Mutable state threaded through the rule steps.
class ConstraintRun {
public:
    ConstraintRun(const TreeGeometry& geometry, std::span<const MaybeLabel> predictions,
                  std::span<const ProbVector> probs, const PostConfig& config)
        : geo_(geometry), probs_(probs), config_(config), predictions_(predictions.begin(), predictions.end()) {
        const std::size_t n = geo_.size();
        out_.segment_ids.reserve(n);
        for (const Segment& s : geo_.tree.segments) out_.segment_ids.push_back(s.centerline.segment_id);
        out_.labels.assign(n, std::nullopt);
        out_.steps.assign(n, AuditStep::unassigned);
        out_.ri_rejected.assign(n, false);
        out_.sides.assign(n, Side::left);
        displaced_.assign(n, false);
        holder_.fill(std::nullopt);
    }

    LabelAssignment run() {
        partition_ = split_left_right(geo_.mids, geo_.centroid);
        for (std::size_t i : partition_.right) out_.sides[i] = Side::right;
        for (std::size_t i = 0; i < geo_.size(); ++i) {
            const MaybeLabel p = predictions_[i];
            if (!p || is_right_label(*p) != (out_.sides[i] == Side::right)) displaced_[i] = true;
        }

        unique_from(partition_.right, ArteryLabel::RCA, AuditStep::right_main, true);
        unique_from(partition_.right, ArteryLabel::AM, AuditStep::right_main, false);
        unique_from(partition_.left, ArteryLabel::LM, AuditStep::left_main, true);
        unique_from(partition_.left, ArteryLabel::LAD, AuditStep::left_main, true);
        unique_from(partition_.left, ArteryLabel::LCx, AuditStep::left_main, true);

        const RiResolution ri =
            resolve_ri(partition_.left, predictions_, probs_, geo_.starts, lm_end(), config_);
        for (std::size_t i : ri.rejected) out_.ri_rejected[i] = true;
        if (ri.ri) assign(*ri.ri, ArteryLabel::RI, AuditStep::ramus);
        for (std::size_t i : ri.losers) displaced_[i] = true;

        series(Series::diagonal, ArteryLabel::LAD, AuditStep::diagonal);
        series(Series::marginal, ArteryLabel::LCx, AuditStep::marginal);
        unique_from(partition_.left, ArteryLabel::Sep, AuditStep::septal, false);

        reassign_displaced();
        return std::move(out_);
    }

private:
    std::optional<Point3> lm_end() const {
        const auto lm = holder_[index_of(ArteryLabel::LM)];
        return lm ? std::optional<Point3>(geo_.ends[*lm]) : std::nullopt;
    }

    const Centerline* parent(ArteryLabel label) const {
        const auto h = holder_[index_of(label)];
        return h ? &geo_.tree.segments[*h].centerline : nullptr;
    }

    void assign(std::size_t i, ArteryLabel label, AuditStep step) {
        out_.labels[i] = label;
        out_.steps[i] = step;
        holder_[index_of(label)] = i;
        displaced_[i] = false;
    }

    void unique_from(std::span<const std::size_t> side, ArteryLabel label, AuditStep step, bool required) {
        std::vector<std::size_t> candidates;
        for (std::size_t i : side) {
            if (predictions_[i] == label) candidates.push_back(i);
        }
        const auto winner = assign_unique_max(candidates, probs_, label);
        if (!winner) {
            if (required) out_.warnings.push_back(std::string(label_name(label)) + " not found");
            return;
        }
        assign(*winner, label, step);
        for (std::size_t i : candidates) {
            if (i != *winner) displaced_[i] = true;
        }
    }

    void series(Series which, ArteryLabel parent_label, AuditStep step) {
        std::vector<std::size_t> members;
        for (std::size_t i : partition_.left) {
            if (in_series(predictions_[i], which)) members.push_back(i);
        }
        const SeriesResult r = order_branch_series(members, predictions_, probs_, geo_.starts,
                                                   parent(parent_label), lm_end(), which);
        if (r.warning) out_.warnings.push_back(*r.warning);
        for (const auto& [i, label] : r.assigned) assign(i, label, step);
        for (std::size_t i : r.displaced) displaced_[i] = true;
    }

    bool any_assigned(Series which) const {
        for (ArteryLabel l : series_labels(which)) {
            if (holder_[index_of(l)]) return true;
        }
        return false;
    }

    bool can_append(std::size_t i, Series which, std::size_t rank, ArteryLabel parent_label) const {
        const Centerline* p = parent(parent_label);
        if (!p) return false;
        const auto& labels = series_labels(which);
        std::size_t count = 0;
        while (count < labels.size() && holder_[index_of(labels[count])]) ++count;
        if (rank != count) return false;
        if (count == 0) return true;
        const std::size_t previous = *holder_[index_of(labels[count - 1])];
        return series_key(previous, *p, geo_.starts, lm_end()) < series_key(i, *p, geo_.starts, lm_end());
    }

    bool allowed(std::size_t i, ArteryLabel label) const {
        if (holder_[index_of(label)]) return false;
        if (is_right_label(label) != (out_.sides[i] == Side::right)) return false;
        switch (label) {
            case ArteryLabel::RI: {
                const auto end = lm_end();
                return end && distance(geo_.starts[i], *end) < config_.ri_threshold;
            }
            case ArteryLabel::LM: return !any_assigned(Series::diagonal) && !any_assigned(Series::marginal);
            case ArteryLabel::LAD: return !any_assigned(Series::diagonal);
            case ArteryLabel::LCx: return !any_assigned(Series::marginal);
            case ArteryLabel::D1: return can_append(i, Series::diagonal, 0, ArteryLabel::LAD);
            case ArteryLabel::D2: return can_append(i, Series::diagonal, 1, ArteryLabel::LAD);
            case ArteryLabel::D3: return can_append(i, Series::diagonal, 2, ArteryLabel::LAD);
            case ArteryLabel::OM1: return can_append(i, Series::marginal, 0, ArteryLabel::LCx);
            case ArteryLabel::OM2: return can_append(i, Series::marginal, 1, ArteryLabel::LCx);
            case ArteryLabel::OM3: return can_append(i, Series::marginal, 2, ArteryLabel::LCx);
            default: return true;
        }
    }

    // Greedy: repeatedly take the most probable (segment, free label) pair.
    void reassign_displaced() {
        for (;;) {
            std::optional<std::pair<std::size_t, ArteryLabel>> best;
            double best_p = 0.0;
            for (std::size_t i = 0; i < geo_.size(); ++i) {
                if (!displaced_[i] || out_.labels[i]) continue;
                for (ArteryLabel label : kAllLabels) {
                    const double p = probs_[i][index_of(label)];
                    if ((!best || p > best_p) && allowed(i, label)) {
                        best = {i, label};
                        best_p = p;
                    }
                }
            }
            if (!best) break;
            assign(best->first, best->second, AuditStep::reassigned);
        }
    }

    const TreeGeometry& geo_;
    std::span<const ProbVector> probs_;
    const PostConfig& config_;
    std::vector<MaybeLabel> predictions_;
    SidePartition partition_;
    std::vector<bool> displaced_;
    std::array<std::optional<std::size_t>, kLabelCount> holder_;
    LabelAssignment out_;
};

}  // namespace

LabelAssignment apply_constraints(const CoronaryTree& tree, std::span<const MaybeLabel> predictions,
                                  std::span<const ProbVector> probs, const PostConfig& config) {
    config.validate();
    if (predictions.size() != tree.segments.size() || probs.size() != tree.segments.size()) {
        throw ShapeError("apply_constraints: need one prediction and one probability vector per segment");
    }
    const TreeGeometry geometry(tree);
    return ConstraintRun(geometry, predictions, probs, config).run();
}

LabelAssignment apply_constraints(const CoronaryTree& tree, std::span<const ProbVector> probs,
                                  const PostConfig& config) {
    std::vector<MaybeLabel> predictions;
    predictions.reserve(probs.size());
    for (const ProbVector& p : probs) predictions.emplace_back(argmax_label(p));
    return apply_constraints(tree, predictions, probs, config);
}

LabelAssignment raw_assignment(const CoronaryTree& tree, std::span<const ProbVector> probs) {
    if (probs.size() != tree.segments.size()) throw ShapeError("raw_assignment: one probability vector per segment");
    const TreeGeometry geometry(tree);
    const SidePartition partition = split_left_right(geometry.mids, geometry.centroid);
    LabelAssignment out;
    out.sides.assign(geometry.size(), Side::left);
    for (std::size_t i : partition.right) out.sides[i] = Side::right;
    for (std::size_t i = 0; i < geometry.size(); ++i) {
        out.segment_ids.push_back(geometry.tree.segments[i].centerline.segment_id);
        out.labels.emplace_back(argmax_label(probs[i]));
        out.steps.push_back(AuditStep::raw);
    }
    out.ri_rejected.assign(geometry.size(), false);
    return out;
}

}  // namespace coronary
