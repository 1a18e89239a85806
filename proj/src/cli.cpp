#include "coronary/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <map>

#include "coronary/error.hpp"
#include "coronary/eval.hpp"
#include "coronary/json_io.hpp"
#include "coronary/util.hpp"

namespace coronary::cli {

namespace fs = std::filesystem;

int report_exception() {
    try {
        throw;
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << '\n';
        return kSchema;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
}

std::optional<std::uint64_t> env_seed() {
    const char* value = std::getenv("CORONARY_SEED");
    if (!value || !*value) return std::nullopt;
    char* end = nullptr;
    const unsigned long long seed = std::strtoull(value, &end, 10);
    if (*end != '\0') throw ConfigError("CORONARY_SEED must be a non-negative integer");
    return seed;
}

namespace {

nlohmann::json read_config(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
}

void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Error("cannot create output directory '" + dir.string() + "'");
}

nlohmann::json file_entry(const fs::path& path, const fs::path& relative_to) {
    return {{"path", fs::relative(path, relative_to).generic_string()}, {"fnv1a64", hex64(fnv1a64(read_file(path)))}};
}

nlohmann::json manifest(std::string_view command, nlohmann::json config, nlohmann::json seeds,
                        nlohmann::json inputs, nlohmann::json artifacts) {
    return {{"tool", kToolName},
            {"version", kToolVersion},
            {"command", command},
            {"config", std::move(config)},
            {"seeds", std::move(seeds)},
            {"inputs", std::move(inputs)},
            {"artifacts", std::move(artifacts)}};
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

}  // namespace

std::vector<fs::path> tree_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error("'" + dir.string() + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const fs::path& p = entry.path();
        if (entry.is_regular_file() && p.extension() == ".json" && p.filename() != "manifest.json") {
            files.push_back(p);
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<Mlp> load_models(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error("model directory '" + dir.string() + "' does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".model") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error("no *.model files in '" + dir.string() + "'");
    std::vector<Mlp> models;
    for (const auto& f : files) models.push_back(load_model(f));
    return models;
}

nlohmann::json cmd_generate(const GenerateOptions& options) {
    GenConfig config;
    if (const auto seed = env_seed()) config.seed = *seed;
    if (options.config) config = read_config(*options.config).get<GenConfig>();
    if (options.seed) config.seed = *options.seed;
    config.validate();
    ensure_directory(options.out);

    nlohmann::json artifacts = nlohmann::json::array();
    for (std::size_t i = 0; i < options.count; ++i) {
        const CoronaryTree tree = generate_tree(config, i);
        const fs::path path = options.out / (tree.patient_id + ".json");
        write_tree(tree, path);
        artifacts.push_back(file_entry(path, options.out));
    }
    nlohmann::json inputs = nlohmann::json::array();
    if (options.config) inputs.push_back(file_entry(*options.config, options.config->parent_path()));
    nlohmann::json m = manifest("generate", {{"generator", config}, {"count", options.count}},
                                {{"master", config.seed}}, inputs, artifacts);
    write_json(options.out / "manifest.json", m);
    return m;
}

nlohmann::json cmd_train(const TrainOptions& options) {
    TrainConfig config;
    if (const auto seed = env_seed()) config.seed = *seed;
    if (options.config) config = read_config(*options.config).get<TrainConfig>();
    if (options.epochs) config.epochs = *options.epochs;
    if (options.batch_size) config.batch_size = *options.batch_size;
    if (options.gamma) config.gamma = *options.gamma;
    if (options.learning_rate) config.learning_rate = *options.learning_rate;
    if (options.seed) config.seed = *options.seed;
    config.validate();

    std::vector<CoronaryTree> trees;
    nlohmann::json inputs = nlohmann::json::array();
    for (const fs::path& file : tree_files(options.data)) {
        CoronaryTree tree = read_tree(file);
        if (!tree.labelled()) throw SchemaError(file.string() + ": training data must be fully labelled");
        trees.push_back(std::move(tree));
        inputs.push_back(file_entry(file, options.data));
    }
    if (trees.size() < options.folds) {
        throw ConfigError("need at least " + std::to_string(options.folds) + " patients for " +
                          std::to_string(options.folds) + "-fold training, found " + std::to_string(trees.size()));
    }
    ensure_directory(options.out);

    const CrossValidation cv = cross_validate(trees, config, options.folds, Architecture{}, options.workers);

    nlohmann::json artifacts = nlohmann::json::array();
    nlohmann::json folds = nlohmann::json::array();
    nlohmann::json seeds = {{"master", config.seed}, {"split", config.seed}, {"folds", nlohmann::json::array()}};
    for (std::size_t f = 0; f < cv.models.size(); ++f) {
        const fs::path path = options.out / ("fold_" + std::to_string(f) + ".model");
        save_model(cv.models[f], path);
        artifacts.push_back(file_entry(path, options.out));
        seeds["folds"].push_back(derive_seed(config.seed, f));
        const FoldOutcome& outcome = cv.folds[f];
        folds.push_back({{"fold", f},
                         {"validation_patients", outcome.validation_patients},
                         {"final_loss", outcome.loss_history.back()},
                         {"warnings", outcome.warnings},
                         {"validation", report_json(outcome.validation)}});
    }
    const nlohmann::json report = {{"folds", folds}, {"train_config", config}, {"parameter_count", cv.models[0].param_count()}};
    write_json(options.out / "cv_report.json", report);
    artifacts.push_back(file_entry(options.out / "cv_report.json", options.out));

    nlohmann::json m = manifest("train", {{"train", config}, {"folds", options.folds}, {"architecture", Architecture{}}},
                                seeds, inputs, artifacts);
    write_json(options.out / "manifest.json", m);
    return m;
}

nlohmann::json cmd_label(const LabelOptions& options) {
    PostConfig post{options.ri_threshold};
    post.validate();
    const std::vector<Mlp> models = load_models(options.models);

    auto label_one = [&](const fs::path& tree_path, const fs::path& out_path) {
        const CoronaryTree tree = read_tree(tree_path);
        const TreeLabelling labelling = label_tree(tree, models, post, !options.no_post);
        const nlohmann::json j = labels_to_json(labelling, !options.no_post, post);
        write_json(out_path, j);
        return j;
    };

    if (fs::is_directory(options.tree)) {
        ensure_directory(options.out);
        nlohmann::json written = nlohmann::json::array();
        for (const fs::path& file : tree_files(options.tree)) {
            const fs::path out = options.out / file.filename();
            label_one(file, out);
            written.push_back(out.filename().string());
        }
        return {{"labelled", written}};
    }
    if (options.out.has_parent_path()) ensure_directory(options.out.parent_path());
    return label_one(options.tree, options.out);
}

EvalOutput cmd_eval(const EvalOptions& options) {
    std::map<std::string, LabelFile> predicted;
    for (const fs::path& file : tree_files(options.labels)) {
        LabelFile lf = labels_from_json(parse_json(read_file(file), file.string()));
        const std::string id = lf.patient_id;
        if (!predicted.emplace(id, std::move(lf)).second) throw SchemaError("duplicate label file for '" + id + "'");
    }

    std::vector<ArteryLabel> truth;
    std::vector<MaybeLabel> final_labels;
    std::vector<MaybeLabel> raw_labels;
    std::size_t trees = 0;
    for (const fs::path& file : tree_files(options.truth)) {
        const CoronaryTree tree = read_tree(file);
        if (!tree.labelled()) throw SchemaError(file.string() + ": truth tree is not fully labelled");
        const auto it = predicted.find(tree.patient_id);
        if (it == predicted.end()) throw SchemaError("no label file for patient '" + tree.patient_id + "'");
        const LabelFile& lf = it->second;
        if (lf.segment_ids.size() != tree.segments.size()) {
            throw SchemaError("segment ids of '" + tree.patient_id + "' differ between labels and truth");
        }
        for (const Segment& s : tree.segments) {
            const auto pos = std::find(lf.segment_ids.begin(), lf.segment_ids.end(), s.centerline.segment_id);
            if (pos == lf.segment_ids.end()) {
                throw SchemaError("segment '" + s.centerline.segment_id + "' of '" + tree.patient_id +
                                  "' missing from label file");
            }
            const auto k = static_cast<std::size_t>(pos - lf.segment_ids.begin());
            truth.push_back(*s.label);
            final_labels.push_back(lf.labels[k]);
            raw_labels.push_back(lf.raw_labels[k]);
        }
        predicted.erase(it);
        ++trees;
    }
    if (!predicted.empty()) throw SchemaError("label file for '" + predicted.begin()->first + "' has no truth tree");
    if (truth.empty()) throw SchemaError("no truth trees found");

    EvaluationReport report = evaluate_labels(truth, final_labels, raw_labels);
    report.trees = trees;
    EvalOutput out{report_json(report), report_table(report.metrics, report.averages) + "\n" +
                                            confusion_table(report.matrix)};
    if (options.out) {
        ensure_directory(*options.out);
        write_json(*options.out / "report.json", out.report);
        write_file_atomic(*options.out / "report.txt", out.table);
    }
    return out;
}

}  // namespace coronary::cli
