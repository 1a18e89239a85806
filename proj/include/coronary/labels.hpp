#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace coronary {

// Index order is the order of the per-segment probability vector.
enum class ArteryLabel : std::uint8_t {
    LM = 0,
    LAD,
    LCx,
    RI,
    D1,
    D2,
    D3,
    OM1,
    OM2,
    OM3,
    Sep,
    RCA,
    AM,
};

inline constexpr std::size_t kLabelCount = 13;

inline constexpr std::array<ArteryLabel, kLabelCount> kAllLabels = {
    ArteryLabel::LM,  ArteryLabel::LAD, ArteryLabel::LCx, ArteryLabel::RI,  ArteryLabel::D1,
    ArteryLabel::D2,  ArteryLabel::D3,  ArteryLabel::OM1, ArteryLabel::OM2, ArteryLabel::OM3,
    ArteryLabel::Sep, ArteryLabel::RCA, ArteryLabel::AM,
};

/// A final label; std::nullopt is the "unassigned" sentinel.
using MaybeLabel = std::optional<ArteryLabel>;

inline constexpr std::string_view kUnassignedName = "unassigned";

constexpr std::size_t index_of(ArteryLabel label) { return static_cast<std::size_t>(label); }

constexpr ArteryLabel label_at(std::size_t index) { return kAllLabels.at(index); }

std::string_view label_name(ArteryLabel label);
std::string_view label_name(MaybeLabel label);

/// Parses one of the 13 names (case-sensitive). Returns nullopt on unknown input.
std::optional<ArteryLabel> parse_label(std::string_view name);

/// True for labels that belong to the right coronary tree (RCA, AM).
constexpr bool is_right_label(ArteryLabel label) {
    return label == ArteryLabel::RCA || label == ArteryLabel::AM;
}

constexpr bool is_diagonal(ArteryLabel label) {
    return label == ArteryLabel::D1 || label == ArteryLabel::D2 || label == ArteryLabel::D3;
}

constexpr bool is_marginal(ArteryLabel label) {
    return label == ArteryLabel::OM1 || label == ArteryLabel::OM2 || label == ArteryLabel::OM3;
}

/// Display colour (hex RGB) for external viewers.
std::string_view label_color(ArteryLabel label);

}  // namespace coronary
