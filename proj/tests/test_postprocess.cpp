#include <doctest.h>

#include "coronary/error.hpp"
#include "coronary/postprocess.hpp"
#include "coronary/synthgen.hpp"
#include "postprocess_oracle.hpp"
#include "support.hpp"

using namespace coronary;
using namespace coronary::test;
using L = ArteryLabel;

namespace {

ProbVector peaked(L label, double p = 0.9) {
    ProbVector v;
    v.fill((1.0 - p) / 12.0);
    v[index_of(label)] = p;
    return v;
}

// A consistent left+right tree: LM, LAD, LCx, D1, D2, OM1, RCA, AM, plus an RI
// starting `ri_gap` mm beyond the LM end.
CoronaryTree canonical(double ri_gap = 2.0) {
    return tree_of({
        line({{4, 0, 0}, {7, 0, 0}, {10, 0, 0}}, "lm"),
        line({{10, 0, 0}, {12, 10, 0}, {13, 20, 0}, {13, 30, 0}}, "lad"),
        line({{10, 0, 0}, {12, -10, 0}, {14, -20, 0}}, "lcx"),
        line({{13, 20, 0}, {20, 24, 1}}, "d2"),
        line({{12, 8, 0}, {20, 12, 1}}, "d1"),
        line({{13, -12, 0}, {19, -16, 0}}, "om1"),
        line({{10 + ri_gap, 0, 0}, {16 + ri_gap, 2, -3}}, "ri"),
        line({{-10, 0, 0}, {-25, 8, 0}, {-30, 18, -2}}, "rca"),
        line({{-25, 8, 0}, {-32, 12, 2}}, "am"),
    });
}

const std::vector<L> kCanonical{L::LM, L::LAD, L::LCx, L::D2, L::D1, L::OM1, L::RI, L::RCA, L::AM};

std::vector<ProbVector> probs_for(const std::vector<L>& labels) {
    std::vector<ProbVector> out;
    for (L l : labels) out.push_back(peaked(l));
    return out;
}

}  // namespace

TEST_CASE("split_left_right") {
    const std::vector<Point3> mids{{-10, 0, 0}, {0, 5, 0}, {3, 0, 0}};
    const SidePartition p = split_left_right(mids, {0, 0, 0});
    CHECK(p.right == std::vector<std::size_t>{0});
    CHECK(p.left == std::vector<std::size_t>{1, 2});
    std::vector<Point3> shifted;
    for (Point3 m : mids) shifted.push_back(m + Point3{7.5, -3, 1});
    const SidePartition q = split_left_right(shifted, {7.5, -3, 1});
    CHECK(q.right == p.right);
    CHECK(q.left == p.left);
    CHECK(split_left_right({}, {}).left.empty());
}

TEST_CASE("assign_unique_max") {
    std::vector<ProbVector> probs{peaked(L::RCA, 0.9), peaked(L::RCA, 0.6), peaked(L::AM, 0.01)};
    CHECK(assign_unique_max(std::vector<std::size_t>{0, 1}, probs, L::RCA) == 0u);
    CHECK(assign_unique_max(std::vector<std::size_t>{1, 0}, probs, L::RCA) == 0u);
    CHECK(assign_unique_max(std::vector<std::size_t>{2}, probs, L::RCA) == 2u);
    CHECK_FALSE(assign_unique_max(std::vector<std::size_t>{}, probs, L::AM).has_value());
    probs[0] = probs[1];
    CHECK(assign_unique_max(std::vector<std::size_t>{1, 0}, probs, L::RCA) == 0u);
}

TEST_CASE("resolve_ri gate and rejection") {
    const std::vector<Point3> starts{{12, 0, 0}, {15, 0, 0}, {11, 1, 0}};
    std::vector<ProbVector> probs{peaked(L::RI, 0.8), peaked(L::RI, 0.7), peaked(L::RI, 0.7)};
    probs[1][index_of(L::D1)] = 0.30;
    probs[1][index_of(L::OM1)] = 0.20;
    std::vector<MaybeLabel> pred{L::RI, L::RI, L::RI};
    const std::vector<std::size_t> left{0, 1, 2};
    const RiResolution r = resolve_ri(left, pred, probs, starts, Point3{10, 0, 0}, PostConfig{});
    CHECK(r.ri == 0u);
    CHECK(r.rejected == std::vector<std::size_t>{1});
    CHECK(r.losers == std::vector<std::size_t>{2});
    CHECK(pred[1] == L::D1);

    probs[1][index_of(L::OM1)] = 0.35;
    pred = {L::RI, L::RI, L::RI};
    resolve_ri(left, pred, probs, starts, Point3{10, 0, 0}, PostConfig{});
    CHECK(pred[1] == L::OM1);

    pred = {L::RI, L::RI, L::RI};
    const RiResolution none = resolve_ri(left, pred, probs, starts, std::nullopt, PostConfig{});
    CHECK_FALSE(none.ri.has_value());
    CHECK(none.rejected.size() == 3);
}

TEST_CASE("order_branch_series") {
    const Centerline lad = line({{0, 0, 0}, {0, 60, 0}}, "lad");
    const std::vector<Point3> starts{{1, 40, 0}, {1, 15, 0}, {2, 15, 0}, {1, 50, 0}};
    const std::vector<MaybeLabel> pred{L::D1, L::D1, L::D3, L::D2};
    std::vector<ProbVector> probs(4, peaked(L::D1));

    SeriesResult r = order_branch_series(std::vector<std::size_t>{0, 1}, pred, probs, starts, &lad, std::nullopt,
                                         Series::diagonal);
    REQUIRE(r.assigned.size() == 2);
    CHECK(r.assigned[0] == std::pair<std::size_t, L>{1, L::D1});
    CHECK(r.assigned[1] == std::pair<std::size_t, L>{0, L::D2});

    // equal positions: nearer to the LM end first
    r = order_branch_series(std::vector<std::size_t>{2, 1}, pred, probs, starts, &lad, Point3{0, 0, 0},
                            Series::diagonal);
    CHECK(r.assigned[0].first == 1);
    r = order_branch_series(std::vector<std::size_t>{2, 1}, pred, probs, starts, &lad, Point3{5, 15, 0},
                            Series::diagonal);
    CHECK(r.assigned[0].first == 2);

    // single marginal anywhere is OM1
    r = order_branch_series(std::vector<std::size_t>{3}, pred, probs, starts, &lad, std::nullopt, Series::marginal);
    CHECK(r.assigned[0] == std::pair<std::size_t, L>{3, L::OM1});

    // four members: the lowest series mass is dropped
    probs[3][index_of(L::D1)] = 0.01;
    r = order_branch_series(std::vector<std::size_t>{0, 1, 2, 3}, pred, probs, starts, &lad, std::nullopt,
                            Series::diagonal);
    CHECK(r.assigned.size() == 3);
    CHECK(r.displaced == std::vector<std::size_t>{3});

    // no parent: raw labels kept, duplicates resolved by argmax
    probs[0][index_of(L::D1)] = 0.95;
    r = order_branch_series(std::vector<std::size_t>{0, 1, 2}, pred, probs, starts, nullptr, std::nullopt,
                            Series::diagonal);
    CHECK(r.warning.has_value());
    CHECK(r.displaced == std::vector<std::size_t>{1});
    CHECK(r.assigned.size() == 2);
}

TEST_CASE("consistent predictions are a fixed point") {
    const CoronaryTree tree = canonical();
    const LabelAssignment a = apply_constraints(tree, probs_for(kCanonical));
    for (std::size_t i = 0; i < kCanonical.size(); ++i) CHECK(a.labels[i] == kCanonical[i]);
    CHECK(a.warnings.empty());
    CHECK(a.steps[0] == AuditStep::left_main);
    CHECK(a.steps[3] == AuditStep::diagonal);
    CHECK(a.steps[6] == AuditStep::ramus);
    CHECK(a.steps[7] == AuditStep::right_main);
    CHECK(a.label_of("ri") == L::RI);
    CHECK_THROWS(a.label_of("nope"));
}

TEST_CASE("duplicate LAD predictions leave exactly one LAD") {
    const CoronaryTree tree = canonical();
    auto labels = kCanonical;
    labels[4] = L::LAD;
    auto probs = probs_for(labels);
    probs[4] = peaked(L::LAD, 0.5);
    probs[4][index_of(L::D1)] = 0.3;
    const LabelAssignment a = apply_constraints(tree, probs);
    CHECK(std::count(a.labels.begin(), a.labels.end(), MaybeLabel{L::LAD}) == 1);
    CHECK(a.labels[1] == L::LAD);
    CHECK(a.steps[4] == AuditStep::reassigned);
    // the lone remaining diagonal is renumbered D1; the loser cannot follow it
    // as D2 (it sits proximal) and lands on the free septal label
    CHECK(a.labels[3] == L::D1);
    CHECK(a.labels[4] == L::Sep);
    CHECK(oracle::check_invariants(tree, a, 3.0).empty());
}

TEST_CASE("RI outside the gate falls back to D1 or OM1") {
    const CoronaryTree tree = canonical(5.0);
    auto labels = kCanonical;
    labels[4] = L::D2;  // leave D1 free
    labels[3] = L::D3;
    auto probs = probs_for(labels);
    probs[6][index_of(L::D1)] = 0.06;
    probs[6][index_of(L::OM1)] = 0.02;
    const LabelAssignment a = apply_constraints(tree, probs);
    CHECK(a.ri_rejected[6]);
    CHECK(a.labels[6] != L::RI);
    CHECK(std::find(a.labels.begin(), a.labels.end(), MaybeLabel{L::RI}) == a.labels.end());

    const LabelAssignment tight = apply_constraints(canonical(2.0), probs_for(kCanonical), PostConfig{0.001});
    CHECK(tight.ri_rejected[6]);
    CHECK(tight.labels[6] != L::RI);
    CHECK(oracle::check_invariants(canonical(2.0), tight, 0.001).empty());
}

TEST_CASE("side-incompatible predictions are reassigned or left unassigned") {
    const CoronaryTree tree = canonical();
    auto labels = kCanonical;
    labels[8] = L::LAD;  // AM segment predicted as a left label
    auto probs = probs_for(labels);
    probs[8][index_of(L::AM)] = 0.08;
    const LabelAssignment a = apply_constraints(tree, probs);
    CHECK(a.labels[8] == L::AM);
    CHECK(a.steps[8] == AuditStep::reassigned);

    // two equally confident AM predictions: the lower index keeps AM, the
    // other takes the free right-side label
    labels = kCanonical;
    labels[7] = L::AM;
    const LabelAssignment b = apply_constraints(tree, probs_for(labels));
    CHECK(b.labels[7] == L::AM);
    CHECK(b.labels[8] == L::RCA);
    CHECK(b.warnings.size() == 1);
}

TEST_CASE("missing mandatory arteries produce warnings, not errors") {
    const CoronaryTree tree = tree_of({line({{10, 0, 0}, {20, 0, 0}}), line({{-10, 0, 0}, {-20, 0, 0}})});
    const LabelAssignment a = apply_constraints(tree, std::vector<ProbVector>{peaked(L::Sep), peaked(L::AM)});
    CHECK(a.labels[0] == L::Sep);
    CHECK(a.labels[1] == L::AM);
    CHECK(a.warnings.size() == 4);  // RCA, LM, LAD, LCx
}

TEST_CASE("input validation") {
    const CoronaryTree tree = canonical();
    CHECK_THROWS_AS(apply_constraints(tree, std::vector<ProbVector>(2)), ShapeError);
    CHECK_THROWS_AS(apply_constraints(tree, probs_for(kCanonical), PostConfig{0.0}), ConfigError);
    const LabelAssignment raw = raw_assignment(tree, probs_for(kCanonical));
    CHECK(raw.steps[0] == AuditStep::raw);
}

TEST_CASE("matches the step-by-step reference on randomized small trees") {
    std::mt19937_64 rng(2024);
    int mismatches = 0;
    for (int k = 0; k < 2000; ++k) {
        const oracle::Case c = oracle::random_case(rng);
        const LabelAssignment lib = oracle::run_library(c);
        if (!oracle::same(lib, oracle::reference_constraints(c))) ++mismatches;
        const std::string violation = oracle::check_invariants(oracle::to_tree(c), lib, c.threshold);
        CHECK_MESSAGE(violation.empty(), "case ", k, ": ", violation);
    }
    CHECK(mismatches == 0);
}

TEST_CASE("idempotence and probability scaling") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> scale(1e-3, 1e3);
    for (int k = 0; k < 1000; ++k) {
        const oracle::Case c = oracle::random_case(rng, true);
        const CoronaryTree tree = oracle::to_tree(c);
        const LabelAssignment first = apply_constraints(tree, c.probs, PostConfig{c.threshold});

        std::vector<ProbVector> onehot;
        for (const MaybeLabel& l : first.labels) {
            ProbVector p{};
            if (l) p[index_of(*l)] = 1.0;
            else p.fill(1.0 / 13.0);
            onehot.push_back(p);
        }
        const LabelAssignment again = apply_constraints(tree, first.labels, onehot, PostConfig{c.threshold});
        CHECK(again.labels == first.labels);

        std::vector<ProbVector> scaled = c.probs;
        for (ProbVector& p : scaled) {
            const double s = scale(rng);
            double total = 0.0;
            for (double& v : p) total += (v *= s);
            for (double& v : p) v /= total;
        }
        CHECK(apply_constraints(tree, scaled, PostConfig{c.threshold}).labels == first.labels);
    }
}

TEST_CASE("generated trees are fixed points under one-hot truth") {
    GenConfig config;
    for (std::uint64_t i = 0; i < 200; ++i) {
        const CoronaryTree tree = generate_tree(config, i);
        std::vector<ProbVector> probs;
        for (const Segment& s : tree.segments) {
            ProbVector p{};
            p[index_of(*s.label)] = 1.0;
            probs.push_back(p);
        }
        const LabelAssignment a = apply_constraints(tree, probs);
        for (std::size_t k = 0; k < tree.segments.size(); ++k) CHECK(a.labels[k] == tree.segments[k].label);
    }
}
