#include "coronary/json_io.hpp"

#include <set>

#include "coronary/error.hpp"
#include "coronary/util.hpp"

namespace coronary {

namespace {

void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> known, const char* what) {
    if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError(std::string(what) + ": unknown key '" + key + "'");
        }
    }
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out, const char* what) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string(what) + ": key '" + key + "' has the wrong type");
    }
}

[[noreturn]] void schema_fail(const std::string& message) { throw SchemaError("tree file: " + message); }

Point3 point_from(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) schema_fail(where + " must be an array of three numbers");
    for (const auto& v : j) {
        if (!v.is_number()) schema_fail(where + " must be an array of three numbers");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

void to_json(nlohmann::json& j, const Architecture& arch) {
    j = {{"input", arch.input}, {"hidden", arch.hidden}, {"output", arch.output}, {"dropout", arch.dropout}};
}

void from_json(const nlohmann::json& j, Architecture& arch) {
    check_keys(j, {"input", "hidden", "output", "dropout"}, "architecture");
    read_opt(j, "input", arch.input, "architecture");
    read_opt(j, "hidden", arch.hidden, "architecture");
    read_opt(j, "output", arch.output, "architecture");
    read_opt(j, "dropout", arch.dropout, "architecture");
    arch.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"epochs", c.epochs},
         {"batch_size", c.batch_size},
         {"gamma", c.gamma},
         {"learning_rate", c.learning_rate},
         {"beta1", c.beta1},
         {"beta2", c.beta2},
         {"adam_epsilon", c.adam_epsilon},
         {"bn_momentum", c.bn_momentum},
         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    constexpr const char* what = "train config";
    check_keys(j, {"epochs", "batch_size", "gamma", "learning_rate", "beta1", "beta2", "adam_epsilon", "bn_momentum", "seed"},
               what);
    read_opt(j, "epochs", c.epochs, what);
    read_opt(j, "batch_size", c.batch_size, what);
    read_opt(j, "gamma", c.gamma, what);
    read_opt(j, "learning_rate", c.learning_rate, what);
    read_opt(j, "beta1", c.beta1, what);
    read_opt(j, "beta2", c.beta2, what);
    read_opt(j, "adam_epsilon", c.adam_epsilon, what);
    read_opt(j, "bn_momentum", c.bn_momentum, what);
    read_opt(j, "seed", c.seed, what);
    c.validate();
}

void to_json(nlohmann::json& j, const GenConfig& c) {
    const BranchPresence& p = c.presence;
    j = {{"seed", c.seed},
         {"presence",
          {{"RI", p.ri}, {"D2", p.d2}, {"D3", p.d3}, {"OM2", p.om2}, {"OM3", p.om3}, {"Sep", p.sep}, {"AM", p.am}}},
         {"min_scale", c.min_scale},
         {"max_scale", c.max_scale},
         {"wiggle", c.wiggle},
         {"direction_jitter", c.direction_jitter},
         {"rotation_jitter_deg", c.rotation_jitter_deg},
         {"ostium_offset", c.ostium_offset},
         {"sample_step", c.sample_step}};
}

void from_json(const nlohmann::json& j, GenConfig& c) {
    constexpr const char* what = "generator config";
    check_keys(j, {"seed", "presence", "min_scale", "max_scale", "wiggle", "direction_jitter", "rotation_jitter_deg",
                   "ostium_offset", "sample_step"},
               what);
    read_opt(j, "seed", c.seed, what);
    if (j.contains("presence")) {
        const auto& p = j.at("presence");
        check_keys(p, {"RI", "D2", "D3", "OM2", "OM3", "Sep", "AM"}, "presence");
        read_opt(p, "RI", c.presence.ri, what);
        read_opt(p, "D2", c.presence.d2, what);
        read_opt(p, "D3", c.presence.d3, what);
        read_opt(p, "OM2", c.presence.om2, what);
        read_opt(p, "OM3", c.presence.om3, what);
        read_opt(p, "Sep", c.presence.sep, what);
        read_opt(p, "AM", c.presence.am, what);
    }
    read_opt(j, "min_scale", c.min_scale, what);
    read_opt(j, "max_scale", c.max_scale, what);
    read_opt(j, "wiggle", c.wiggle, what);
    read_opt(j, "direction_jitter", c.direction_jitter, what);
    read_opt(j, "rotation_jitter_deg", c.rotation_jitter_deg, what);
    read_opt(j, "ostium_offset", c.ostium_offset, what);
    read_opt(j, "sample_step", c.sample_step, what);
    c.validate();
}

void to_json(nlohmann::json& j, const PostConfig& c) { j = {{"ri_threshold", c.ri_threshold}}; }

void from_json(const nlohmann::json& j, PostConfig& c) {
    check_keys(j, {"ri_threshold"}, "post-processing config");
    read_opt(j, "ri_threshold", c.ri_threshold, "post-processing config");
    c.validate();
}

nlohmann::json tree_to_json(const CoronaryTree& tree) {
    nlohmann::json segments = nlohmann::json::array();
    for (const Segment& s : tree.segments) {
        nlohmann::json points = nlohmann::json::array();
        for (const Point3& p : s.centerline.points) points.push_back({p.x, p.y, p.z});
        nlohmann::json seg = {{"id", s.centerline.segment_id}, {"points", points}};
        if (s.label) seg["label"] = label_name(*s.label);
        segments.push_back(std::move(seg));
    }
    return {{"patient_id", tree.patient_id},
            {"units", units_name(tree.units)},
            {"spacing", tree.frame.spacing},
            {"origin", {tree.frame.origin.x, tree.frame.origin.y, tree.frame.origin.z}},
            {"segments", segments}};
}

CoronaryTree tree_from_json(const nlohmann::json& j) {
    if (!j.is_object()) schema_fail("document must be an object");
    for (const char* key : {"patient_id", "units", "spacing", "origin", "segments"}) {
        if (!j.contains(key)) schema_fail(std::string("missing key '") + key + "'");
    }
    if (j.size() != 5) schema_fail("document has unknown keys");
    CoronaryTree tree;
    if (!j["patient_id"].is_string() || j["patient_id"].get<std::string>().empty()) {
        schema_fail("patient_id must be a non-empty string");
    }
    tree.patient_id = j["patient_id"].get<std::string>();
    const auto& units = j["units"];
    if (units == "voxel") {
        tree.units = Units::voxel;
    } else if (units == "mm") {
        tree.units = Units::mm;
    } else {
        schema_fail("units must be \"voxel\" or \"mm\"");
    }
    const Point3 spacing = point_from(j["spacing"], "spacing");
    tree.frame.spacing = {spacing.x, spacing.y, spacing.z};
    tree.frame.origin = point_from(j["origin"], "origin");
    try {
        tree.frame.validate();
    } catch (const ConfigError& e) {
        schema_fail(e.what());
    }

    if (!j["segments"].is_array()) schema_fail("segments must be an array");
    std::set<std::string> ids;
    for (const auto& s : j["segments"]) {
        if (!s.is_object() || !s.contains("id") || !s.contains("points")) {
            schema_fail("each segment needs 'id' and 'points'");
        }
        for (const auto& [key, value] : s.items()) {
            if (key != "id" && key != "points" && key != "label") schema_fail("segment has unknown key '" + key + "'");
        }
        if (!s["id"].is_string()) schema_fail("segment id must be a string");
        Segment segment;
        segment.centerline.segment_id = s["id"].get<std::string>();
        segment.centerline.units = tree.units;
        if (!ids.insert(segment.centerline.segment_id).second) {
            schema_fail("duplicate segment id '" + segment.centerline.segment_id + "'");
        }
        if (!s["points"].is_array()) schema_fail("segment points must be an array");
        for (const auto& p : s["points"]) segment.centerline.points.push_back(point_from(p, "point"));
        try {
            segment.centerline.validate();
        } catch (const DegenerateInputError& e) {
            schema_fail(e.what());
        }
        if (s.contains("label")) {
            if (!s["label"].is_string()) schema_fail("segment label must be a string");
            const auto label = parse_label(s["label"].get<std::string>());
            if (!label) schema_fail("unknown label '" + s["label"].get<std::string>() + "'");
            segment.label = label;
        }
        tree.segments.push_back(std::move(segment));
    }
    return tree;
}

nlohmann::json parse_json(const std::string& text, const std::string& what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(what + ": invalid JSON: " + e.what());
    }
}

CoronaryTree read_tree(const std::filesystem::path& path) {
    return tree_from_json(parse_json(read_file(path), path.string()));
}

void write_tree(const CoronaryTree& tree, const std::filesystem::path& path) {
    write_file_atomic(path, tree_to_json(tree).dump(1) + "\n");
}

nlohmann::json labels_to_json(const TreeLabelling& labelling, bool post_processed, const PostConfig& config) {
    nlohmann::json segments = nlohmann::json::object();
    const LabelAssignment& final = labelling.final;
    for (std::size_t i = 0; i < final.segment_ids.size(); ++i) {
        segments[final.segment_ids[i]] = {{"label", label_name(final.labels[i])},
                                          {"raw_label", label_name(labelling.raw.labels[i])},
                                          {"prob_vector", labelling.probs[i]},
                                          {"audit_step", audit_step_name(final.steps[i])},
                                          {"ri_rejected", static_cast<bool>(final.ri_rejected[i])}};
    }
    nlohmann::json colors = nlohmann::json::object();
    for (ArteryLabel l : kAllLabels) colors[std::string(label_name(l))] = label_color(l);
    return {{"patient_id", labelling.patient_id},
            {"post_processed", post_processed},
            {"ri_threshold", config.ri_threshold},
            {"segments", segments},
            {"warnings", final.warnings},
            {"colors", colors}};
}

LabelFile labels_from_json(const nlohmann::json& j) {
    auto fail = [](const std::string& m) -> void { throw SchemaError("label file: " + m); };
    if (!j.is_object() || !j.contains("patient_id") || !j.contains("segments") || !j["segments"].is_object()) {
        fail("needs 'patient_id' and a 'segments' object");
    }
    LabelFile file;
    if (!j["patient_id"].is_string()) fail("patient_id must be a string");
    file.patient_id = j["patient_id"].get<std::string>();
    for (const auto& [id, entry] : j["segments"].items()) {
        if (!entry.is_object() || !entry.contains("label") || !entry["label"].is_string()) {
            fail("segment '" + id + "' needs a string 'label'");
        }
        const std::string name = entry["label"].get<std::string>();
        MaybeLabel label;
        if (name != kUnassignedName) {
            label = parse_label(name);
            if (!label) fail("segment '" + id + "' has unknown label '" + name + "'");
        }
        MaybeLabel raw = label;
        if (entry.contains("raw_label")) {
            const std::string raw_name = entry["raw_label"].is_string() ? entry["raw_label"].get<std::string>() : "";
            raw = raw_name == kUnassignedName ? std::nullopt : parse_label(raw_name);
            if (!raw && raw_name != kUnassignedName) fail("segment '" + id + "' has unknown raw_label");
        }
        file.segment_ids.push_back(id);
        file.labels.push_back(label);
        file.raw_labels.push_back(raw);
    }
    return file;
}

}  // namespace coronary
