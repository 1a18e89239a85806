#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coronary/network.hpp"
#include "coronary/postprocess.hpp"
#include "coronary/synthgen.hpp"

namespace coronary::cli {

inline constexpr std::string_view kToolName = "coronary-label";
inline constexpr std::string_view kToolVersion = "1.0.0";

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kSchema = 2,
    kConfig = 3,
    kRuntime = 4,
};

/// Maps the active exception to an exit code and prints it to stderr.
int report_exception();

/// Default seed from CORONARY_SEED, if set and numeric.
std::optional<std::uint64_t> env_seed();

struct GenerateOptions {
    std::optional<std::filesystem::path> config;
    std::optional<std::uint64_t> seed;
    std::size_t count = 10;
    std::filesystem::path out;
};

/// Writes `count` tree files plus manifest.json; returns the manifest.
nlohmann::json cmd_generate(const GenerateOptions& options);

struct TrainOptions {
    std::filesystem::path data;
    std::optional<std::filesystem::path> config;
    std::filesystem::path out;
    std::optional<int> epochs;
    std::optional<int> batch_size;
    std::optional<double> gamma;
    std::optional<double> learning_rate;
    std::optional<std::uint64_t> seed;
    std::size_t folds = 5;
    std::size_t workers = 1;
};

/// Trains one model per fold; writes fold_<k>.model, cv_report.json and manifest.json.
nlohmann::json cmd_train(const TrainOptions& options);

struct LabelOptions {
    std::filesystem::path tree;    // file or directory of tree files
    std::filesystem::path models;  // directory of *.model files
    std::filesystem::path out;     // file, or directory when `tree` is a directory
    double ri_threshold = 3.0;
    bool no_post = false;
};

nlohmann::json cmd_label(const LabelOptions& options);

struct EvalOptions {
    std::filesystem::path labels;
    std::filesystem::path truth;
    std::optional<std::filesystem::path> out;  // directory for report.json / report.txt
};

struct EvalOutput {
    nlohmann::json report;
    std::string table;
};

EvalOutput cmd_eval(const EvalOptions& options);

/// Tree files (*.json except manifest.json) in `dir`, sorted by name.
std::vector<std::filesystem::path> tree_files(const std::filesystem::path& dir);

/// Loads every *.model file in `dir`, sorted by name.
std::vector<Mlp> load_models(const std::filesystem::path& dir);

}  // namespace coronary::cli
