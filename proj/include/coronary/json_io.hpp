#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "coronary/eval.hpp"
#include "coronary/geometry.hpp"
#include "coronary/network.hpp"
#include "coronary/postprocess.hpp"
#include "coronary/synthgen.hpp"

namespace coronary {

// Config objects: missing keys keep their defaults, unknown keys raise ConfigError.
void to_json(nlohmann::json& j, const Architecture& arch);
void from_json(const nlohmann::json& j, Architecture& arch);
void to_json(nlohmann::json& j, const TrainConfig& config);
void from_json(const nlohmann::json& j, TrainConfig& config);
void to_json(nlohmann::json& j, const GenConfig& config);
void from_json(const nlohmann::json& j, GenConfig& config);
void to_json(nlohmann::json& j, const PostConfig& config);
void from_json(const nlohmann::json& j, PostConfig& config);

/// Tree file document. Throws SchemaError on any violation.
nlohmann::json tree_to_json(const CoronaryTree& tree);
CoronaryTree tree_from_json(const nlohmann::json& j);

CoronaryTree read_tree(const std::filesystem::path& path);
void write_tree(const CoronaryTree& tree, const std::filesystem::path& path);

/// Label file: segment id -> {label, raw_label, prob_vector, audit_step, ri_rejected}.
nlohmann::json labels_to_json(const TreeLabelling& labelling, bool post_processed, const PostConfig& config);

struct LabelFile {
    std::string patient_id;
    std::vector<std::string> segment_ids;  // sorted
    std::vector<MaybeLabel> labels;
    std::vector<MaybeLabel> raw_labels;  // equal to labels when the file has no raw_label
};

LabelFile labels_from_json(const nlohmann::json& j);

/// Parses text as JSON, mapping parse failures to SchemaError.
nlohmann::json parse_json(const std::string& text, const std::string& what);

}  // namespace coronary
