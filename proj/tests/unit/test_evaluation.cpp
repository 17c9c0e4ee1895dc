#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "gafs/baselines.hpp"
#include "gafs/evaluation.hpp"
#include "unit/helpers.hpp"

using namespace gafs;

TEST_SUITE("evaluation") {

TEST_CASE("confusion matrix enumeration") {
    const auto cm = confusion({1, 1, 0, 0}, {1, 0, 0, 1});
    CHECK(cm.tp == 1);
    CHECK(cm.fn == 1);
    CHECK(cm.tn == 1);
    CHECK(cm.fp == 1);
    const auto perfect = confusion({1, 0, 1}, {1, 0, 1});
    CHECK(perfect.fp == 0);
    CHECK(perfect.fn == 0);
    const auto all_pos = confusion({1, 1, 0, 0}, {1, 1, 1, 1});
    CHECK(all_pos.fp == 2);
    CHECK_THROWS_AS(confusion({1, 2}, {1, 1}), DataError);
}

TEST_CASE("ppv and fdr arithmetic") {
    ConfusionMatrix cm;
    cm.tp = 9;
    cm.fp = 1;
    CHECK(*ppv(cm) == 90.0);
    CHECK(*fdr(cm) == 10.0);
    CHECK_FALSE(ppv(ConfusionMatrix{}).has_value());
    CHECK_FALSE(fdr(ConfusionMatrix{}).has_value());
    for (std::size_t tp = 0; tp <= 6; ++tp) {
        for (std::size_t fp = 0; fp <= 6; ++fp) {
            for (std::size_t tn = 0; tn <= 3; ++tn) {
                for (std::size_t fn = 0; fn <= 3; ++fn) {
                    const ConfusionMatrix c{tp, fp, tn, fn};
                    const auto s = success_metrics(c);
                    const auto f = failure_metrics(c);
                    if (tp + fp == 0) {
                        CHECK_FALSE(s.ppv.has_value());
                    } else {
                        CHECK(*s.ppv == 100.0 * tp / (tp + fp));
                        CHECK(*s.ppv + *s.fdr == doctest::Approx(100.0));
                    }
                    if (tn + fn == 0) {
                        CHECK_FALSE(f.ppv.has_value());
                    } else {
                        CHECK(*f.ppv == 100.0 * tn / (tn + fn));
                        CHECK(*f.fdr == 100.0 * fn / (tn + fn));
                    }
                }
            }
        }
    }
}

TEST_CASE("roc hand example") {
    const auto curve = roc_curve({0.9, 0.8, 0.7, 0.6}, {1, 1, 0, 1});
    CHECK(std::abs(auc(curve) - 2.0 / 3.0) < 1e-12);
    CHECK(curve.fpr.front() == 0.0);
    CHECK(curve.tpr.front() == 0.0);
    CHECK(curve.fpr.back() == 1.0);
    CHECK(curve.tpr.back() == 1.0);
    CHECK(std::isinf(curve.thresholds.front()));
}

TEST_CASE("roc degenerate and perfect cases") {
    CHECK(auc(roc_curve({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1})) == 1.0);
    CHECK(auc(roc_curve({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1})) == 0.5);
    CHECK_THROWS_AS(roc_curve({0.1, 0.2}, {1, 1}), DataError);
}

TEST_CASE("auc is invariant under monotone transforms") {
    Rng rng(31);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 10 + rng.index(50);
        std::vector<double> s(n), g(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            // Coarse scores so ties occur.
            s[i] = std::round(rng.uniform() * 20.0) / 20.0;
            y[i] = i < 2 ? static_cast<int>(i) : (rng.bernoulli(0.4) ? 1 : 0);
            g[i] = std::exp(3.0 * s[i]) - 7.0;
        }
        CHECK(auc(roc_curve(s, y)) == doctest::Approx(auc(roc_curve(g, y))).epsilon(1e-12));
    }
}

TEST_CASE("roc csv layout") {
    const auto dir = gafs::testing::scratch_dir("evaluation_roc");
    write_roc_csv(roc_curve({0.9, 0.1}, {1, 0}), (dir / "roc.csv").string());
    CHECK(gafs::testing::read_text(dir / "roc.csv") == "fpr,tpr,threshold\n0,0,inf\n0,1,0.90000000000000002\n1,1,0.10000000000000001\n");
}

TEST_CASE("full-mask selector equals the all-features classifier") {
    const Dataset d = gafs::testing::two_blobs(40, 3, 0.6, 2);
    MethodSpec full{"full", [](const Dataset& train) {
                        SelectorOutput out;
                        out.mask = SelectionMask(train.features(), true);
                        return out;
                    },
                    ClassifierKind::lda, {}};
    MethodSpec none{"none", [](const Dataset&) { return SelectorOutput{}; }, ClassifierKind::lda, {}};
    const auto report = compare_methods(d, {full, none}, SplitSpec{0.7, true, 1}, {});
    REQUIRE_FALSE(report.rows[0].error);
    CHECK(report.rows[0].train_accuracy == report.rows[1].train_accuracy);
    CHECK(report.rows[0].test_accuracy == report.rows[1].test_accuracy);
    CHECK(report.rows[0].n_selected == 3);
}

TEST_CASE("selectors never see test rows") {
    std::vector<std::size_t> keep(10);
    std::iota(keep.begin(), keep.end(), 0);
    for (std::size_t i = 30; i < 60; ++i) {
        keep.push_back(i);
    }
    const Dataset d = select_rows(gafs::testing::two_blobs(30, 2, 0.6, 3), keep);
    const SplitSpec split{0.7, true, 4};
    const auto [train_part, test_part] = stratified_split(d, split);
    std::set<std::int64_t> seen;
    MethodSpec spy{"spy", [&](const Dataset& train) {
                       seen.insert(train.row_origin.begin(), train.row_origin.end());
                       return SelectorOutput{};
                   },
                   ClassifierKind::lda, {}};
    CompareOptions options;
    options.oversample = SmoteConfig{};
    options.oversample->target_minority_ratio = 0.5;
    const auto report = compare_methods(d, {spy}, split, options);
    CHECK_FALSE(report.rows[0].error);
    CHECK(report.synthetic_rows > 0);
    for (auto origin : test_part.row_origin) {
        CHECK(seen.count(origin) == 0);
    }
}

TEST_CASE("a feature informative only on test rows is not selected") {
    int picked = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Dataset d = gafs::testing::two_blobs(40, 4, 0.0, 100 + seed);
        const SplitSpec split{0.7, true, seed};
        const auto train_rows = split_train_indices(d.labels, split);
        std::vector<bool> in_train(d.rows(), false);
        for (auto i : train_rows) {
            in_train[i] = true;
        }
        Rng rng(seed);
        for (std::size_t i = 0; i < d.rows(); ++i) {
            d.x(static_cast<Eigen::Index>(i), 3) = in_train[i] ? rng.normal() : 3.0 * d.labels[i];
        }
        MethodSpec fwe{"fwe", [&](const Dataset& train) {
                           SelectorOutput out;
                           SelectionMask mask = select_fwe(univariate_scores(train), 0.05);
                           picked += mask.test(3) ? 1 : 0;
                           out.mask = mask.none() ? SelectionMask(train.features(), true) : mask;
                           return out;
                       },
                       ClassifierKind::lda, {}};
        compare_methods(d, {fwe}, split, {});
    }
    CHECK(picked <= 1);
}

TEST_CASE("a failing selector becomes a row error") {
    const Dataset d = gafs::testing::two_blobs(20, 2, 0.6, 5);
    MethodSpec bad{"bad", [](const Dataset&) -> SelectorOutput { throw DataError("boom"); }, ClassifierKind::lda, {}};
    const auto report = compare_methods(d, {bad}, SplitSpec{}, {});
    REQUIRE(report.rows[0].error);
    CHECK(*report.rows[0].error == "boom");
    nlohmann::json j = report;
    CHECK(j["methods"][0]["error"] == "boom");
}

}
