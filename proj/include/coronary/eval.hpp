#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "coronary/geometry.hpp"
#include "coronary/labels.hpp"
#include "coronary/network.hpp"
#include "coronary/postprocess.hpp"

namespace coronary {

struct ClassRow {
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;    // ground-truth segments of this class
    std::size_t predicted = 0;  // segments predicted as this class
    std::size_t true_positives = 0;
    bool absent = false;        // neither in truth nor in predictions
};

struct ClassMetrics {
    std::array<ClassRow, kLabelCount> rows{};
    std::size_t total = 0;
    std::size_t correct = 0;

    const ClassRow& operator[](ArteryLabel label) const { return rows[index_of(label)]; }
};

/// A prediction of nullopt (unassigned) is a false negative for its true class.
ClassMetrics per_class_metrics(std::span<const ArteryLabel> truth, std::span<const MaybeLabel> predicted);

struct Averages {
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
};

/// Support-weighted mean over classes with support > 0.
Averages weighted_average(const ClassMetrics& metrics);

inline constexpr std::size_t kConfusionColumns = kLabelCount + 1;  // last column: unassigned

struct ConfusionMatrix {
    std::array<std::array<std::size_t, kConfusionColumns>, kLabelCount> counts{};
    std::array<std::array<double, kConfusionColumns>, kLabelCount> percent{};  // row-normalised

    std::size_t total() const;
};

ConfusionMatrix confusion(std::span<const ArteryLabel> truth, std::span<const MaybeLabel> predicted);

struct FoldSplit {
    std::vector<std::vector<std::string>> folds;
};

/// Seeded shuffle, then contiguous folds whose sizes differ by at most one.
FoldSplit kfold(std::span<const std::string> patients, std::size_t k, std::uint64_t seed);

/// Mean of the models' probability vectors, renormalised.
std::vector<ProbVector> ensemble_predict(std::span<const Mlp> models, std::span<const FeatureVector> features);
ProbVector ensemble_predict(std::span<const Mlp> models, const FeatureVector& features);

struct TreeLabelling {
    std::string patient_id;
    std::vector<ProbVector> probs;
    LabelAssignment raw;
    LabelAssignment final;
};

/// Features -> ensemble -> optional rules for one tree.
TreeLabelling label_tree(const CoronaryTree& tree, std::span<const Mlp> models, const PostConfig& config,
                         bool post_process = true);

struct EvaluationReport {
    ClassMetrics metrics;
    Averages averages;
    ConfusionMatrix matrix;
    ClassMetrics raw_metrics;  // argmax labels before the rules
    Averages raw_averages;
    std::size_t trees = 0;
};

EvaluationReport evaluate_labels(std::span<const ArteryLabel> truth, std::span<const MaybeLabel> final_labels,
                                 std::span<const MaybeLabel> raw_labels);

/// Labels every test tree and scores the pooled segments against ground truth.
EvaluationReport evaluate_pipeline(std::span<const CoronaryTree> test_trees, std::span<const Mlp> models,
                                   const PostConfig& config);

nlohmann::json report_json(const EvaluationReport& report);

/// Per-class recall / precision / F1 in percent plus the weighted average row.
std::string report_table(const ClassMetrics& metrics, const Averages& averages);

/// Row-normalised confusion percentages as aligned text.
std::string confusion_table(const ConfusionMatrix& matrix);

struct FoldOutcome {
    std::vector<std::string> validation_patients;
    std::vector<double> loss_history;
    std::vector<std::string> warnings;
    EvaluationReport validation;
    double seconds = 0.0;
};

struct CrossValidation {
    std::vector<Mlp> models;
    std::vector<FoldOutcome> folds;
};

/// Trains one model per fold (held-out fold for validation). Fold f uses
/// seed derive_seed(config.seed, f); the split uses config.seed. Folds are
/// independent, so `workers` > 1 runs them on separate threads with
/// identical results.
CrossValidation cross_validate(std::span<const CoronaryTree> trees, const TrainConfig& config, std::size_t k = 5,
                               const Architecture& arch = {}, std::size_t workers = 1);

}  // namespace coronary
