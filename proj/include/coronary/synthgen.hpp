#pragma once

#include <cstdint>

#include "coronary/geometry.hpp"

namespace coronary {

/// Presence probabilities of optional branches. D3 is drawn only when D2 is
/// present and OM3 only when OM2 is present, so their values are conditional.
struct BranchPresence {
    double ri = 0.3;
    double d2 = 0.8;
    double d3 = 0.5;
    double om2 = 0.7;
    double om3 = 0.4;
    double sep = 0.6;
    double am = 0.6;

    friend bool operator==(const BranchPresence&, const BranchPresence&) = default;
};

struct GenConfig {
    std::uint64_t seed = 42;
    BranchPresence presence;
    double min_scale = 0.85;       // uniform size factor range
    double max_scale = 1.15;
    double wiggle = 0.12;          // tangent oscillation amplitude, radians
    double direction_jitter = 0.15;  // per-branch direction perturbation
    double rotation_jitter_deg = 8.0;
    double ostium_offset = 10.0;   // mm from the aortic root to each ostium along x
    double sample_step = 1.0;      // mean spacing of centerline samples, mm

    void validate() const;
    friend bool operator==(const GenConfig&, const GenConfig&) = default;
};

/// Labelled synthetic tree in voxel units. Deterministic in (config, index).
CoronaryTree generate_tree(const GenConfig& config, std::uint64_t index);

}  // namespace coronary
