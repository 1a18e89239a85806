#include "coronary/labels.hpp"

namespace coronary {

namespace {

constexpr std::array<std::string_view, kLabelCount> kNames = {
    "LM", "LAD", "LCx", "RI", "D1", "D2", "D3", "OM1", "OM2", "OM3", "Sep", "RCA", "AM",
};

constexpr std::array<std::string_view, kLabelCount> kColors = {
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4", "#f032e6",
    "#bfef45", "#fabed4", "#469990", "#dcbeff", "#9a6324", "#800000",
};

}  // namespace

std::string_view label_name(ArteryLabel label) { return kNames[index_of(label)]; }

std::string_view label_name(MaybeLabel label) {
    return label ? label_name(*label) : kUnassignedName;
}

std::optional<ArteryLabel> parse_label(std::string_view name) {
    for (std::size_t i = 0; i < kLabelCount; ++i) {
        if (kNames[i] == name) return label_at(i);
    }
    return std::nullopt;
}

std::string_view label_color(ArteryLabel label) { return kColors[index_of(label)]; }

}  // namespace coronary
