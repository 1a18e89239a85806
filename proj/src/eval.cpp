#include "coronary/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "coronary/error.hpp"
#include "coronary/features.hpp"
#include "coronary/util.hpp"

namespace coronary {

namespace {

void require_aligned(std::size_t truth, std::size_t predicted) {
    if (truth != predicted) {
        throw ShapeError("truth has " + std::to_string(truth) + " labels but predictions have " +
                         std::to_string(predicted));
    }
}

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ClassMetrics per_class_metrics(std::span<const ArteryLabel> truth, std::span<const MaybeLabel> predicted) {
    require_aligned(truth.size(), predicted.size());
    ClassMetrics m;
    m.total = truth.size();
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++m.rows[index_of(truth[i])].support;
        if (predicted[i]) {
            ++m.rows[index_of(*predicted[i])].predicted;
            if (*predicted[i] == truth[i]) {
                ++m.rows[index_of(truth[i])].true_positives;
                ++m.correct;
            }
        }
    }
    for (ClassRow& row : m.rows) {
        row.absent = row.support == 0 && row.predicted == 0;
        row.recall = ratio(row.true_positives, row.support);
        row.precision = ratio(row.true_positives, row.predicted);
        const double sum = row.precision + row.recall;
        row.f1 = sum > 0.0 ? 2.0 * row.precision * row.recall / sum : 0.0;
    }
    return m;
}

Averages weighted_average(const ClassMetrics& metrics) {
    Averages avg;
    std::size_t total = 0;
    for (const ClassRow& row : metrics.rows) {
        if (row.support == 0) continue;
        const auto w = static_cast<double>(row.support);
        avg.recall += w * row.recall;
        avg.precision += w * row.precision;
        avg.f1 += w * row.f1;
        total += row.support;
    }
    if (total == 0) throw ShapeError("weighted_average: no class has ground-truth support");
    const auto t = static_cast<double>(total);
    return {avg.recall / t, avg.precision / t, avg.f1 / t};
}

std::size_t ConfusionMatrix::total() const {
    std::size_t n = 0;
    for (const auto& row : counts) n += std::accumulate(row.begin(), row.end(), std::size_t{0});
    return n;
}

ConfusionMatrix confusion(std::span<const ArteryLabel> truth, std::span<const MaybeLabel> predicted) {
    require_aligned(truth.size(), predicted.size());
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const std::size_t col = predicted[i] ? index_of(*predicted[i]) : kLabelCount;
        ++cm.counts[index_of(truth[i])][col];
    }
    for (std::size_t r = 0; r < kLabelCount; ++r) {
        const std::size_t row_total = std::accumulate(cm.counts[r].begin(), cm.counts[r].end(), std::size_t{0});
        for (std::size_t c = 0; c < kConfusionColumns; ++c) cm.percent[r][c] = 100.0 * ratio(cm.counts[r][c], row_total);
    }
    return cm;
}

FoldSplit kfold(std::span<const std::string> patients, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("k-fold needs k >= 2");
    if (patients.size() < k) {
        throw ConfigError("k-fold needs at least " + std::to_string(k) + " patients, got " +
                          std::to_string(patients.size()));
    }
    std::vector<std::string> order(patients.begin(), patients.end());
    if (std::set<std::string>(order.begin(), order.end()).size() != order.size()) {
        throw ConfigError("k-fold: duplicate patient ids");
    }
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    FoldSplit split;
    const std::size_t base = order.size() / k;
    const std::size_t extra = order.size() % k;
    std::size_t begin = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        split.folds.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                 order.begin() + static_cast<std::ptrdiff_t>(begin + size));
        begin += size;
    }
    return split;
}

std::vector<ProbVector> ensemble_predict(std::span<const Mlp> models, std::span<const FeatureVector> features) {
    if (models.empty()) throw ConfigError("ensemble needs at least one model");
    for (const Mlp& m : models) {
        if (!(m.architecture() == models.front().architecture())) {
            throw ShapeError("ensemble members have different architectures");
        }
        if (m.mode() != Mode::eval) throw ShapeError("ensemble members must be in eval mode");
    }
    std::vector<ProbVector> mean(features.size(), ProbVector{});
    if (features.empty()) return mean;
    for (const Mlp& m : models) {
        const auto probs = m.forward(features);
        for (std::size_t i = 0; i < features.size(); ++i) {
            for (std::size_t k = 0; k < kLabelCount; ++k) mean[i][k] += probs[i][k];
        }
    }
    for (ProbVector& p : mean) {
        const double sum = std::accumulate(p.begin(), p.end(), 0.0);
        for (double& v : p) v /= sum;
    }
    return mean;
}

ProbVector ensemble_predict(std::span<const Mlp> models, const FeatureVector& features) {
    return ensemble_predict(models, std::span<const FeatureVector>(&features, 1)).front();
}

TreeLabelling label_tree(const CoronaryTree& tree, std::span<const Mlp> models, const PostConfig& config,
                         bool post_process) {
    const auto rows = extract_features(tree);
    std::vector<FeatureVector> features;
    features.reserve(rows.size());
    for (const auto& r : rows) features.push_back(r.features);

    TreeLabelling out;
    out.patient_id = tree.patient_id;
    out.probs = ensemble_predict(models, features);
    out.raw = raw_assignment(tree, out.probs);
    out.final = post_process ? apply_constraints(tree, out.probs, config) : out.raw;
    return out;
}

EvaluationReport evaluate_labels(std::span<const ArteryLabel> truth, std::span<const MaybeLabel> final_labels,
                                 std::span<const MaybeLabel> raw_labels) {
    EvaluationReport report;
    report.metrics = per_class_metrics(truth, final_labels);
    report.averages = weighted_average(report.metrics);
    report.matrix = confusion(truth, final_labels);
    report.raw_metrics = per_class_metrics(truth, raw_labels);
    report.raw_averages = weighted_average(report.raw_metrics);
    return report;
}

EvaluationReport evaluate_pipeline(std::span<const CoronaryTree> test_trees, std::span<const Mlp> models,
                                   const PostConfig& config) {
    std::vector<ArteryLabel> truth;
    std::vector<MaybeLabel> final_labels;
    std::vector<MaybeLabel> raw_labels;
    for (const CoronaryTree& tree : test_trees) {
        if (!tree.labelled()) throw SchemaError("tree '" + tree.patient_id + "' lacks ground-truth labels");
        const TreeLabelling labelling = label_tree(tree, models, config);
        for (std::size_t i = 0; i < tree.segments.size(); ++i) {
            truth.push_back(*tree.segments[i].label);
            final_labels.push_back(labelling.final.labels[i]);
            raw_labels.push_back(labelling.raw.labels[i]);
        }
    }
    EvaluationReport report = evaluate_labels(truth, final_labels, raw_labels);
    report.trees = test_trees.size();
    return report;
}

namespace {

nlohmann::json metrics_json(const ClassMetrics& metrics, const Averages& averages) {
    nlohmann::json classes = nlohmann::json::array();
    for (std::size_t k = 0; k < kLabelCount; ++k) {
        const ClassRow& row = metrics.rows[k];
        classes.push_back({{"label", label_name(label_at(k))},
                           {"recall", row.recall},
                           {"precision", row.precision},
                           {"f1", row.f1},
                           {"support", row.support},
                           {"predicted", row.predicted},
                           {"true_positives", row.true_positives},
                           {"absent", row.absent}});
    }
    return {{"classes", classes},
            {"weighted_average", {{"recall", averages.recall}, {"precision", averages.precision}, {"f1", averages.f1}}},
            {"total", metrics.total},
            {"correct", metrics.correct}};
}

std::string percent(double v) {
    char buffer[16];
    std::snprintf(buffer, sizeof buffer, "%.2f", 100.0 * v);
    return buffer;
}

std::string pad(std::string_view text, std::size_t width) {
    std::string out(text);
    if (out.size() < width) out.insert(0, width - out.size(), ' ');
    return out;
}

}  // namespace

nlohmann::json report_json(const EvaluationReport& report) {
    nlohmann::json j;
    j["trees"] = report.trees;
    j["post_processed"] = metrics_json(report.metrics, report.averages);
    j["raw"] = metrics_json(report.raw_metrics, report.raw_averages);

    nlohmann::json rows = nlohmann::json::array();
    for (ArteryLabel l : kAllLabels) rows.push_back(label_name(l));
    nlohmann::json columns = rows;
    columns.push_back(kUnassignedName);
    nlohmann::json counts = nlohmann::json::array();
    nlohmann::json percents = nlohmann::json::array();
    for (std::size_t r = 0; r < kLabelCount; ++r) {
        counts.push_back(report.matrix.counts[r]);
        percents.push_back(report.matrix.percent[r]);
    }
    j["confusion"] = {{"rows", rows},
                      {"columns", columns},
                      {"counts", counts},
                      {"row_percent", percents}};
    return j;
}

std::string report_table(const ClassMetrics& metrics, const Averages& averages) {
    std::ostringstream out;
    out << pad("", 6) << pad("Recall", 10) << pad("Precision", 11) << pad("F1", 10) << pad("Support", 9) << '\n';
    for (std::size_t k = 0; k < kLabelCount; ++k) {
        const ClassRow& row = metrics.rows[k];
        out << std::string(label_name(label_at(k))) << std::string(6 - label_name(label_at(k)).size(), ' ');
        if (row.support == 0 && row.predicted == 0) {
            out << pad("-", 10) << pad("-", 11) << pad("-", 10);
        } else {
            out << pad(percent(row.recall), 10) << pad(percent(row.precision), 11) << pad(percent(row.f1), 10);
        }
        out << pad(std::to_string(row.support), 9) << '\n';
    }
    std::size_t support = 0;
    for (const ClassRow& row : metrics.rows) support += row.support;
    out << "Avg.  " << pad(percent(averages.recall), 10) << pad(percent(averages.precision), 11)
        << pad(percent(averages.f1), 10) << pad(std::to_string(support), 9) << '\n';
    return out.str();
}

std::string confusion_table(const ConfusionMatrix& matrix) {
    std::ostringstream out;
    out << pad("true\\pred", 10);
    for (ArteryLabel l : kAllLabels) out << pad(label_name(l), 7);
    out << pad("none", 7) << '\n';
    for (std::size_t r = 0; r < kLabelCount; ++r) {
        out << pad(label_name(label_at(r)), 10);
        for (std::size_t c = 0; c < kConfusionColumns; ++c) {
            char buffer[16];
            std::snprintf(buffer, sizeof buffer, "%.1f", matrix.percent[r][c]);
            out << pad(buffer, 7);
        }
        out << '\n';
    }
    return out.str();
}

CrossValidation cross_validate(std::span<const CoronaryTree> trees, const TrainConfig& config, std::size_t k,
                               const Architecture& arch, std::size_t workers) {
    config.validate();
    std::vector<std::string> patients;
    std::map<std::string, const CoronaryTree*> by_id;
    for (const CoronaryTree& tree : trees) {
        if (!tree.labelled()) throw SchemaError("tree '" + tree.patient_id + "' lacks ground-truth labels");
        patients.push_back(tree.patient_id);
        by_id[tree.patient_id] = &tree;
    }
    const FoldSplit split = kfold(patients, k, config.seed);

    // Features are computed once per tree.
    std::map<std::string, std::vector<LabelledExample>> examples;
    for (const CoronaryTree& tree : trees) examples[tree.patient_id] = labelled_examples(tree);

    CrossValidation cv;
    cv.models.assign(k, Mlp(arch));
    cv.folds.resize(k);

    auto run_fold = [&](std::size_t f) {
        std::vector<LabelledExample> training;
        for (std::size_t g = 0; g < k; ++g) {
            if (g == f) continue;
            for (const std::string& id : split.folds[g]) {
                const auto& rows = examples.at(id);
                training.insert(training.end(), rows.begin(), rows.end());
            }
        }
        TrainConfig fold_config = config;
        fold_config.seed = derive_seed(config.seed, f);
        TrainResult trained = train(training, fold_config, arch);

        std::vector<CoronaryTree> held_out;
        for (const std::string& id : split.folds[f]) held_out.push_back(*by_id.at(id));
        FoldOutcome& outcome = cv.folds[f];
        outcome.validation_patients = split.folds[f];
        outcome.loss_history = std::move(trained.loss_history);
        outcome.warnings = std::move(trained.warnings);
        outcome.seconds = trained.seconds;
        cv.models[f] = std::move(trained.model);
        outcome.validation = evaluate_pipeline(held_out, std::span<const Mlp>(&cv.models[f], 1), PostConfig{});
    };

    workers = std::clamp<std::size_t>(workers, 1, k);
    if (workers == 1) {
        for (std::size_t f = 0; f < k; ++f) run_fold(f);
        return cv;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t f; (f = next.fetch_add(1)) < k;) {
                try {
                    run_fold(f);
                } catch (...) {
                    const std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return cv;
}

}  // namespace coronary
