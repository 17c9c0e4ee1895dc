#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gafs/common.hpp"
#include "gafs/dataset.hpp"

namespace gafs {

/// Per-feature one-way ANOVA F statistic between the two classes.
struct FeatureScores {
    std::vector<double> statistic;
    std::vector<double> p_value;
};

FeatureScores univariate_scores(const Dataset& dataset);

/// Bonferroni: keep i iff p_i <= alpha / m.
SelectionMask select_fwe(const FeatureScores& scores, double alpha);

/// Benjamini-Hochberg step-up at level alpha.
SelectionMask select_fdr(const FeatureScores& scores, double alpha);

/// Top ceil(m * percentile / 100) features by statistic; ties go to the
/// lower index.
SelectionMask select_percentile(const FeatureScores& scores, double percentile);

struct PcaModel {
    Matrix components;  // k x m, orthonormal rows
    Vector explained_variance;
    Vector mean;
};

PcaModel pca_fit(const Dataset& dataset, std::size_t k);
/// Projects centered rows onto the components; feature names become pc1..pck.
Dataset pca_transform(const PcaModel& model, const Dataset& dataset);
Matrix pca_reconstruct(const PcaModel& model, const Matrix& scores);

/// Scores a candidate subset; higher is better.
using SubsetEvaluator = std::function<double(const SelectionMask&)>;

struct SequentialResult {
    SelectionMask mask;
    double score = 0.0;
    std::size_t evaluations = 0;
};

/// Greedy forward selection. The first feature is always added; later
/// additions must strictly improve the score.
SequentialResult sfs(std::size_t m, const SubsetEvaluator& evaluator, std::size_t max_features);

/// Greedy backward elimination from the full set. A removal is accepted when
/// it does not lower the score.
SequentialResult sbs(std::size_t m, const SubsetEvaluator& evaluator, std::size_t min_features);

/// merit(S) = k * mean|r_cf| / sqrt(k + k(k-1) * mean|r_ff|).
double cfs_merit(const std::vector<double>& feature_class_corr, const Matrix& feature_corr,
                 const std::vector<std::size_t>& subset);

/// Correlation-based feature selection by greedy forward search on merit.
/// Feature-class correlations not significant at the 5% level count as 0.
SelectionMask cfs(const Dataset& dataset);

struct LassoPath {
    std::vector<double> lambdas;
    std::vector<Vector> coefficients;
    std::vector<double> intercepts;
};

/// Smallest penalty with an all-zero solution: max_j |x_j' (y - ybar)| / n
/// on centered columns.
double lasso_lambda_max(const Dataset& dataset);

/// `count` penalties log-spaced from lambda_max down to ratio * lambda_max.
std::vector<double> lasso_lambda_grid(const Dataset& dataset, std::size_t count, double ratio);

/// Cyclic coordinate descent on (1/2n)||y - b0 - X b||^2 + lambda ||b||_1 for
/// each lambda (descending), warm-started along the path.
LassoPath lasso_path(const Dataset& dataset, const std::vector<double>& lambdas, double tol = 1e-7,
                     std::size_t max_sweeps = 100000);

/// Support of the coefficients at the path lambda closest to `lambda`.
SelectionMask lasso_select(const LassoPath& path, double lambda);

/// Lambda with the lowest k-fold validation MSE along the grid.
double lasso_cv_lambda(const Dataset& dataset, const std::vector<double>& lambdas, std::size_t folds,
                       std::uint64_t seed);

}  // namespace gafs
