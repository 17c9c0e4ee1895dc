#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "gafs/classifiers.hpp"
#include "unit/helpers.hpp"

using namespace gafs;

namespace {

double training_accuracy(const TrainedClassifier& model, const Dataset& d) {
    const Prediction p = predict(model, d.x);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < d.rows(); ++i) {
        ok += p.labels[i] == d.labels[i] ? 1 : 0;
    }
    return static_cast<double>(ok) / static_cast<double>(d.rows());
}

// Every row at least `margin` from the plane x0 = 0.
Dataset separable(std::size_t n, double margin, std::uint64_t seed, std::size_t m = 3) {
    Rng rng(seed);
    Matrix x(n, m);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = i % 2 == 0 ? kSuccess : kFailure;
        const double side = labels[i] == kSuccess ? 1.0 : -1.0;
        x(i, 0) = side * (margin + std::abs(rng.normal()));
        for (std::size_t j = 1; j < m; ++j) {
            x(i, j) = rng.normal();
        }
    }
    return make_dataset(std::move(x), std::move(labels));
}

}  // namespace

TEST_SUITE("classifiers") {

TEST_CASE("presets") {
    TrainConfig c;
    CHECK(apply_preset("adaptive_knn", c) == ClassifierKind::knn);
    CHECK_FALSE(c.knn_uniform);
    CHECK(apply_preset("gaussian_svm", c) == ClassifierKind::svm_rbf);
    CHECK(c.svm_gamma_rule == GammaRule::median_heuristic);
    CHECK(apply_preset("svm_rbf", c) == ClassifierKind::svm_rbf);
    CHECK(c.svm_gamma_rule == GammaRule::inverse_features);
    CHECK_THROWS_AS(apply_preset("bogus", c), ConfigError);
    c.knn_k = 4;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("lda boundary is the perpendicular bisector") {
    // Class 1 mirrors class 0 across x0 = 0, so the pooled covariance is
    // diagonal and the exact boundary is x0 = 0.
    Rng rng(1);
    const std::size_t half = 200;
    Matrix x(2 * half, 2);
    std::vector<int> labels(2 * half);
    for (std::size_t i = 0; i < half; ++i) {
        const double a = rng.normal() - 2.0, b = rng.normal();
        x.row(static_cast<Eigen::Index>(i)) << a, b;
        x.row(static_cast<Eigen::Index>(half + i)) << -a, b;
        labels[i] = kFailure;
        labels[half + i] = kSuccess;
    }
    const auto model = train(ClassifierKind::lda, make_dataset(x, labels), {});
    for (double y : {-3.0, -1.0, 0.0, 2.0, 5.0}) {
        const Matrix probe{{-1e-3, y}, {1e-3, y}};
        const auto p = predict(model, probe);
        CHECK(p.labels[0] == kFailure);
        CHECK(p.labels[1] == kSuccess);
    }
}

TEST_CASE("every classifier fits a separable set") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const Dataset d = separable(200, 2.0, seed, 2);
        for (auto kind : {ClassifierKind::lda, ClassifierKind::logistic, ClassifierKind::knn, ClassifierKind::svm_rbf,
                          ClassifierKind::random_forest}) {
            CAPTURE(to_string(kind));
            CAPTURE(seed);
            TrainConfig c;
            c.forest_trees = 20;
            c.seed = seed;
            const auto model = train(kind, d, c);
            CHECK(training_accuracy(model, d) >= 0.95);
            for (double s : predict(model, d.x).scores) {
                REQUIRE(s >= 0.0);
                REQUIRE(s <= 1.0);
            }
        }
    }
}

TEST_CASE("svm separates linearly separable data without training errors") {
    const Dataset d = separable(80, 1.0, 3);
    TrainConfig c;
    c.svm_c = 100.0;
    CHECK(training_accuracy(train(ClassifierKind::svm_rbf, d, c), d) == 1.0);
}

TEST_CASE("smo respects the box and equality constraints") {
    const Dataset d = gafs::testing::two_blobs(25, 2, 0.5, 4);
    const auto n = static_cast<Eigen::Index>(d.rows());
    Matrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            k(i, j) = std::exp(-0.5 * (d.x.row(i) - d.x.row(j)).squaredNorm());
        }
    }
    std::vector<int> signs(d.rows());
    for (std::size_t i = 0; i < d.rows(); ++i) {
        signs[i] = d.labels[i] == kSuccess ? 1 : -1;
    }
    const double c = 2.0;
    const SmoResult r = smo_solve(k, signs, c, 1e-6, 100000);
    double balance = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        CHECK(r.alpha(i) >= -1e-12);
        CHECK(r.alpha(i) <= c + 1e-12);
        balance += r.alpha(i) * signs[static_cast<std::size_t>(i)];
    }
    CHECK(std::abs(balance) < 1e-9);
    CHECK(r.violation <= 1e-6);
}

TEST_CASE("knn self neighbor and row-order invariance") {
    const Dataset d = gafs::testing::two_blobs(15, 2, 0.3, 5);
    TrainConfig c;
    c.knn_k = 1;
    const auto model = train(ClassifierKind::knn, d, c);
    const auto p = predict(model, d.x);
    for (std::size_t i = 0; i < d.rows(); ++i) {
        CHECK(p.labels[i] == d.labels[i]);
        CHECK(p.scores[i] == static_cast<double>(d.labels[i]));
    }

    c.knn_k = 5;
    std::vector<std::size_t> order(d.rows());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(6);
    rng.shuffle(order);
    const Matrix queries = gafs::testing::two_blobs(10, 2, 0.3, 7).x;
    const auto a = predict(train(ClassifierKind::knn, d, c), queries);
    const auto b = predict(train(ClassifierKind::knn, select_rows(d, order), c), queries);
    CHECK(a.scores == b.scores);
}

TEST_CASE("logistic with zero weights scores one half") {
    TrainedClassifier model;
    model.kind = ClassifierKind::logistic;
    model.dim = 3;
    model.weights = Vector::Zero(3);
    model.intercept = 0.0;
    const auto p = predict(model, Matrix::Random(5, 3));
    for (double s : p.scores) {
        CHECK(s == 0.5);
    }
}

TEST_CASE("regularized logistic converges on two separable points") {
    const Dataset d = make_dataset(Matrix{{-1.0}, {1.0}}, {0, 1});
    TrainConfig c;
    c.logistic_l2 = 1e-2;
    const auto model = train(ClassifierKind::logistic, d, c);
    CHECK(std::isfinite(model.weights(0)));
    CHECK(model.weights(0) > 0.0);
    CHECK(model.weights(0) < 100.0);
    CHECK(training_accuracy(model, d) == 1.0);
}

TEST_CASE("single tree without bootstrap memorizes a consistent set") {
    const Dataset d = gafs::testing::two_blobs(40, 3, 0.2, 8);
    TrainConfig c;
    c.forest_trees = 1;
    c.forest_bootstrap = false;
    CHECK(training_accuracy(train(ClassifierKind::random_forest, d, c), d) == 1.0);
}

TEST_CASE("forest is deterministic and serializes") {
    const Dataset d = gafs::testing::two_blobs(30, 4, 0.5, 9);
    TrainConfig c;
    c.forest_trees = 15;
    c.seed = 3;
    const auto a = train(ClassifierKind::random_forest, d, c);
    c.workers = 2;
    const auto b = train(ClassifierKind::random_forest, d, c);
    CHECK(predict(a, d.x).scores == predict(b, d.x).scores);
    nlohmann::json j = a;
    const auto back = j.get<TrainedClassifier>();
    CHECK(predict(back, d.x).scores == predict(a, d.x).scores);
}

TEST_CASE("degenerate training and prediction inputs") {
    const Dataset one_class = make_dataset(Matrix{{1.0}, {2.0}}, {1, 1});
    CHECK_THROWS_AS(train(ClassifierKind::lda, one_class, {}), DataError);
    const auto model = train(ClassifierKind::lda, separable(20, 1.0, 10), {});
    CHECK_THROWS_AS(predict(model, Matrix::Zero(2, 2)), DataError);
}

TEST_CASE("median heuristic gamma") {
    // Points 0 and 1 on a line: the only pairwise distance is 1.
    CHECK(rbf_median_gamma(Matrix{{0.0}, {1.0}}, 0) == doctest::Approx(0.5));
    CHECK(rbf_median_gamma(Matrix::Zero(4, 2), 0) == doctest::Approx(0.5));
}

}
