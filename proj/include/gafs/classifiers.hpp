#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gafs/common.hpp"
#include "gafs/dataset.hpp"

namespace gafs {

enum class ClassifierKind { lda, logistic, knn, svm_rbf, random_forest };

std::string to_string(ClassifierKind kind);
ClassifierKind parse_classifier_kind(const std::string& name);

enum class GammaRule {
    fixed,
    /// 1 / (2 * median^2) of pairwise distances on a row subsample.
    median_heuristic,
    /// 1 / m.
    inverse_features,
};

struct TrainConfig {
    std::size_t knn_k = 5;
    /// Plain majority vote instead of 1/d weighting.
    bool knn_uniform = false;
    double svm_c = 1.0;
    GammaRule svm_gamma_rule = GammaRule::inverse_features;
    double svm_gamma = 0.0;  // used when svm_gamma_rule == fixed
    double svm_tol = 1e-3;
    std::size_t svm_max_iterations = 1000000;
    double logistic_l2 = 1e-4;
    std::size_t forest_trees = 100;
    std::optional<std::size_t> forest_max_depth;
    bool forest_bootstrap = true;
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    void validate() const;
};

/// Named presets mirroring the classifier table: "lda", "logistic",
/// "adaptive_knn" (distance weighted), "knn", "gaussian_svm" (median
/// heuristic width), "svm_rbf" (gamma = 1/m), "random_forest".
ClassifierKind apply_preset(const std::string& name, TrainConfig& config);

void to_json(nlohmann::json& j, const TrainConfig& config);
void from_json(const nlohmann::json& j, TrainConfig& config);

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    /// Fraction of kSuccess rows reaching this node.
    double value = 0.0;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    double leaf_value(const double* row) const;
};

struct TrainedClassifier {
    ClassifierKind kind = ClassifierKind::lda;
    std::size_t dim = 0;

    // lda
    Matrix class_means;  // 2 x dim, row = label
    Matrix covariance_inverse;
    std::vector<double> priors;

    // logistic
    Vector weights;
    double intercept = 0.0;

    // knn
    Matrix train_x;
    std::vector<int> train_y;
    std::size_t k = 5;
    bool uniform = false;

    // svm
    Matrix support_vectors;
    Vector dual_coef;  // alpha_i * y_i
    double bias = 0.0;
    double gamma = 0.0;

    // forest
    std::vector<DecisionTree> trees;
    std::size_t features_per_split = 0;
};

void to_json(nlohmann::json& j, const TrainedClassifier& model);
void from_json(const nlohmann::json& j, TrainedClassifier& model);

struct Prediction {
    std::vector<int> labels;
    std::vector<double> scores;
};

TrainedClassifier train(ClassifierKind kind, const Dataset& dataset, const TrainConfig& config);

/// Scores are in [0, 1]; label = score >= 0.5.
Prediction predict(const TrainedClassifier& model, const Matrix& rows, std::size_t workers = 1);

double rbf_median_gamma(const Matrix& x, std::uint64_t seed, std::size_t subsample = 500);

struct SmoResult {
    Vector alpha;
    double bias = 0.0;
    std::size_t iterations = 0;
    /// Maximal KKT violation at termination.
    double violation = 0.0;
};

/// Dual C-SVM by SMO with second-order working-set selection. Labels in {-1, +1}.
SmoResult smo_solve(const Matrix& kernel, const std::vector<int>& signs, double c, double tol,
                    std::size_t max_iterations);

}  // namespace gafs
