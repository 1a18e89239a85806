#include <doctest.h>

#include <numeric>
#include <set>

#include "coronary/error.hpp"
#include "coronary/eval.hpp"
#include "coronary/features.hpp"
#include "coronary/synthgen.hpp"

using namespace coronary;
using L = ArteryLabel;

TEST_CASE("worked three-segment example") {
    const std::vector<L> truth{L::LAD, L::LAD, L::LCx};
    const std::vector<MaybeLabel> pred{L::LAD, L::LCx, L::LCx};
    const ClassMetrics m = per_class_metrics(truth, pred);
    CHECK(m[L::LAD].recall == 0.5);
    CHECK(m[L::LAD].precision == 1.0);
    CHECK(m[L::LAD].f1 == 2.0 / 3.0);
    CHECK(m[L::LCx].recall == 1.0);
    CHECK(m[L::LCx].precision == 0.5);
    CHECK(m[L::LAD].support == 2);
    CHECK(m[L::LM].absent);
    CHECK(m.correct == 2);
    const Averages avg = weighted_average(m);
    CHECK(avg.recall == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(avg.precision == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
    CHECK(avg.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("perfect and degenerate predictors") {
    std::vector<L> truth;
    for (std::size_t i = 0; i < 26; ++i) truth.push_back(label_at(i % 13));
    const std::vector<MaybeLabel> perfect(truth.begin(), truth.end());
    const Averages a = weighted_average(per_class_metrics(truth, perfect));
    CHECK(a.recall == 1.0);
    CHECK(a.precision == 1.0);
    CHECK(a.f1 == 1.0);

    const std::vector<L> t{L::LAD, L::LAD, L::LAD, L::LCx};
    const std::vector<MaybeLabel> all_lad(4, L::LAD);
    const ClassMetrics m = per_class_metrics(t, all_lad);
    CHECK(m[L::LAD].recall == 1.0);
    CHECK(m[L::LAD].precision == 0.75);
    CHECK(m[L::LCx].recall == 0.0);
}

TEST_CASE("unassigned counts as a false negative only") {
    const std::vector<L> truth{L::RI, L::RI};
    const std::vector<MaybeLabel> pred{std::nullopt, L::RI};
    const ClassMetrics m = per_class_metrics(truth, pred);
    CHECK(m[L::RI].recall == 0.5);
    CHECK(m[L::RI].precision == 1.0);
    CHECK(m.correct == 1);
    CHECK_THROWS_AS(per_class_metrics(truth, std::vector<MaybeLabel>{L::RI}), ShapeError);
}

TEST_CASE("weighted average") {
    std::vector<L> truth(9, L::LAD);
    truth.push_back(L::LCx);
    std::vector<MaybeLabel> pred(9, L::LAD);
    pred.push_back(std::nullopt);
    CHECK(weighted_average(per_class_metrics(truth, pred)).recall == doctest::Approx(0.9));

    // uniform supports: weighted equals the plain mean
    const std::vector<L> t{L::LAD, L::LAD, L::LCx, L::LCx, L::RCA, L::RCA};
    const std::vector<MaybeLabel> p{L::LAD, L::LCx, L::LCx, L::LCx, L::RCA, L::LAD};
    const ClassMetrics m = per_class_metrics(t, p);
    const double mean = (m[L::LAD].f1 + m[L::LCx].f1 + m[L::RCA].f1) / 3.0;
    CHECK(weighted_average(m).f1 == doctest::Approx(mean).epsilon(1e-15));

    // recomputable from the table, independent of class order
    double num = 0.0;
    std::size_t den = 0;
    for (std::size_t k = kLabelCount; k-- > 0;) {
        num += m.rows[k].precision * static_cast<double>(m.rows[k].support);
        den += m.rows[k].support;
    }
    CHECK(weighted_average(m).precision == doctest::Approx(num / static_cast<double>(den)).epsilon(1e-15));

    std::size_t tp = 0;
    for (const ClassRow& r : m.rows) tp += r.true_positives;
    CHECK(tp == m.correct);
    CHECK_THROWS_AS(weighted_average(ClassMetrics{}), ShapeError);
}

TEST_CASE("confusion matrix") {
    std::vector<L> truth(100, L::D2);
    std::vector<MaybeLabel> pred(100, L::D2);
    for (int i = 0; i < 12; ++i) pred[static_cast<std::size_t>(i)] = L::D1;
    pred[50] = std::nullopt;
    const ConfusionMatrix c = confusion(truth, pred);
    CHECK(c.percent[index_of(L::D2)][index_of(L::D1)] == doctest::Approx(12.0));
    CHECK(c.counts[index_of(L::D2)][kLabelCount] == 1);
    CHECK(c.total() == 100);

    const std::vector<L> t{L::LM, L::RCA};
    const ConfusionMatrix id = confusion(t, std::vector<MaybeLabel>{L::LM, L::RCA});
    CHECK(id.percent[index_of(L::LM)][index_of(L::LM)] == 100.0);
    CHECK(id.percent[index_of(L::LAD)][index_of(L::LAD)] == 0.0);
}

TEST_CASE("kfold") {
    std::vector<std::string> patients;
    for (int i = 0; i < 10; ++i) patients.push_back("p" + std::to_string(i));
    const FoldSplit s = kfold(patients, 5, 1);
    REQUIRE(s.folds.size() == 5);
    for (const auto& f : s.folds) CHECK(f.size() == 2);
    CHECK(kfold(patients, 5, 1).folds == s.folds);

    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        patients.push_back("q" + std::to_string(seed));
        const FoldSplit split = kfold(patients, 5, seed);
        std::multiset<std::string> all;
        std::size_t lo = patients.size(), hi = 0;
        for (const auto& f : split.folds) {
            all.insert(f.begin(), f.end());
            lo = std::min(lo, f.size());
            hi = std::max(hi, f.size());
        }
        CHECK(all == std::multiset<std::string>(patients.begin(), patients.end()));
        CHECK(hi - lo <= 1);
    }
    CHECK_THROWS_AS(kfold(std::vector<std::string>{"a", "b"}, 5, 0), ConfigError);
}

namespace {

Mlp onehot_model(L label) {
    Mlp m;
    Rng rng(1);
    m.initialize(rng);
    m.parameters().weights.back().setZero();
    m.parameters().biases.back().setConstant(-1000.0);
    m.parameters().biases.back()[static_cast<Eigen::Index>(index_of(label))] = 1000.0;
    m.set_mode(Mode::eval);
    return m;
}

}  // namespace

TEST_CASE("ensemble prediction") {
    Rng rng(3);
    Mlp model;
    model.initialize(rng);
    model.set_mode(Mode::eval);
    FeatureVector f;
    for (std::size_t i = 0; i < kFeatureCount; ++i) f.values[i] = static_cast<double>(i) - 4.0;
    const ProbVector single = model.predict(f);
    const std::vector<Mlp> copies(4, model);
    const ProbVector ens = ensemble_predict(copies, f);
    for (std::size_t k = 0; k < kLabelCount; ++k) CHECK(std::abs(ens[k] - single[k]) <= 1e-12);

    const std::vector<Mlp> pair{onehot_model(L::LAD), onehot_model(L::OM2)};
    const ProbVector half = ensemble_predict(pair, f);
    CHECK(half[index_of(L::LAD)] == doctest::Approx(0.5));
    CHECK(half[index_of(L::OM2)] == doctest::Approx(0.5));
    CHECK(std::accumulate(half.begin(), half.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));

    Architecture small{14, {8}, 13, 0.2};
    Mlp other(small);
    other.initialize(rng);
    other.set_mode(Mode::eval);
    CHECK_THROWS_AS(ensemble_predict(std::vector<Mlp>{model, other}, f), ShapeError);
}

TEST_CASE("pipeline report") {
    std::vector<CoronaryTree> trees;
    for (std::uint64_t i = 0; i < 4; ++i) trees.push_back(generate_tree(GenConfig{}, i));
    const std::vector<Mlp> models{onehot_model(L::LAD)};
    const EvaluationReport a = evaluate_pipeline(trees, models, PostConfig{});
    const EvaluationReport b = evaluate_pipeline(trees, models, PostConfig{});
    CHECK(report_json(a).dump() == report_json(b).dump());
    CHECK(a.trees == 4);

    const std::string table = report_table(a.metrics, a.averages);
    CHECK(std::count(table.begin(), table.end(), '\n') == 15);  // header + 13 classes + Avg.
    CHECK(table.find("Avg.") != std::string::npos);
    const auto j = report_json(a);
    CHECK(j["post_processed"]["classes"].size() == 13);
    CHECK(j["confusion"]["columns"].size() == 14);
}
