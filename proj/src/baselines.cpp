#include "gafs/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gafs/special_functions.hpp"

namespace gafs {
namespace {

double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

// Pearson correlation; 0 when either side has no variance.
double abs_correlation(const Vector& a, const Vector& b) {
    const Vector ca = a.array() - a.mean();
    const Vector cb = b.array() - b.mean();
    const double denom = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
    if (!(denom > 0.0)) {
        return 0.0;
    }
    return std::abs(ca.dot(cb) / denom);
}

}  // namespace

FeatureScores univariate_scores(const Dataset& dataset) {
    const std::size_t n0 = dataset.count_label(kFailure);
    const std::size_t n1 = dataset.count_label(kSuccess);
    if (n0 < 2 || n1 < 2) {
        throw DataError("univariate scores need at least two rows per class");
    }
    const double n = static_cast<double>(dataset.rows());
    const double df_within = n - 2.0;
    FeatureScores out;
    for (Eigen::Index j = 0; j < dataset.x.cols(); ++j) {
        double sum[2] = {0.0, 0.0};
        for (std::size_t i = 0; i < dataset.rows(); ++i) {
            sum[dataset.labels[i]] += dataset.x(static_cast<Eigen::Index>(i), j);
        }
        const double mean0 = sum[0] / static_cast<double>(n0);
        const double mean1 = sum[1] / static_cast<double>(n1);
        const double grand = (sum[0] + sum[1]) / n;
        double within = 0.0;
        for (std::size_t i = 0; i < dataset.rows(); ++i) {
            const double mu = dataset.labels[i] == kFailure ? mean0 : mean1;
            const double d = dataset.x(static_cast<Eigen::Index>(i), j) - mu;
            within += d * d;
        }
        const double between = static_cast<double>(n0) * (mean0 - grand) * (mean0 - grand) +
                               static_cast<double>(n1) * (mean1 - grand) * (mean1 - grand);
        // Treat sums of squares at rounding level as exact zeros.
        const double scale = std::max(1.0, grand * grand) * n * 1e-24;
        double f = 0.0;
        double p = 1.0;
        if (within <= scale) {
            if (between > scale) {
                f = std::numeric_limits<double>::infinity();
                p = 0.0;
            }
        } else if (between > scale) {
            f = between / (within / df_within);
            p = stats::f_survival(1.0, df_within, f);
        }
        out.statistic.push_back(f);
        out.p_value.push_back(p);
    }
    return out;
}

SelectionMask select_fwe(const FeatureScores& scores, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw ConfigError("alpha must be in (0, 1]");
    }
    const std::size_t m = scores.p_value.size();
    SelectionMask mask(m);
    const double cutoff = alpha / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
        mask.set(i, scores.p_value[i] <= cutoff);
    }
    return mask;
}

SelectionMask select_fdr(const FeatureScores& scores, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw ConfigError("alpha must be in (0, 1]");
    }
    const std::size_t m = scores.p_value.size();
    std::vector<double> sorted = scores.p_value;
    std::sort(sorted.begin(), sorted.end());
    double cutoff = -1.0;
    for (std::size_t i = m; i-- > 0;) {
        if (sorted[i] <= static_cast<double>(i + 1) * alpha / static_cast<double>(m)) {
            cutoff = sorted[i];
            break;
        }
    }
    SelectionMask mask(m);
    for (std::size_t i = 0; i < m; ++i) {
        mask.set(i, scores.p_value[i] <= cutoff);
    }
    return mask;
}

SelectionMask select_percentile(const FeatureScores& scores, double percentile) {
    if (!(percentile > 0.0 && percentile <= 100.0)) {
        throw ConfigError("percentile must be in (0, 100]");
    }
    const std::size_t m = scores.statistic.size();
    const auto keep = std::min<std::size_t>(
        m, static_cast<std::size_t>(std::ceil(static_cast<double>(m) * percentile / 100.0 - 1e-9)));
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores.statistic[a] > scores.statistic[b];
    });
    SelectionMask mask(m);
    for (std::size_t i = 0; i < keep; ++i) {
        mask.set(order[i]);
    }
    return mask;
}

PcaModel pca_fit(const Dataset& dataset, std::size_t k) {
    const auto n = dataset.x.rows();
    const auto m = dataset.x.cols();
    if (k == 0 || static_cast<Eigen::Index>(k) > std::min<Eigen::Index>(n - 1, m)) {
        throw ConfigError("PCA component count must be in [1, min(n-1, m)]");
    }
    PcaModel model;
    model.mean = dataset.x.colwise().mean().transpose();
    const Matrix centered = dataset.x.rowwise() - model.mean.transpose();
    const Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
    if (solver.info() != Eigen::Success) {
        throw NumericError("covariance eigendecomposition failed");
    }
    const auto kk = static_cast<Eigen::Index>(k);
    model.components.resize(kk, m);
    model.explained_variance.resize(kk);
    for (Eigen::Index c = 0; c < kk; ++c) {
        const Eigen::Index src = m - 1 - c;  // eigenvalues ascend
        Vector v = solver.eigenvectors().col(src);
        // Sign convention: the largest-magnitude entry is positive.
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) {
            v = -v;
        }
        model.components.row(c) = v.transpose();
        model.explained_variance(c) = std::max(0.0, solver.eigenvalues()(src));
    }
    return model;
}

Dataset pca_transform(const PcaModel& model, const Dataset& dataset) {
    if (dataset.x.cols() != model.mean.size()) {
        throw DataError("PCA model dimension does not match dataset");
    }
    Dataset out;
    out.x = (dataset.x.rowwise() - model.mean.transpose()) * model.components.transpose();
    out.missing = MissingMask::Constant(out.x.rows(), out.x.cols(), false);
    out.labels = dataset.labels;
    out.row_origin = dataset.row_origin;
    for (Eigen::Index c = 0; c < out.x.cols(); ++c) {
        out.feature_names.push_back("pc" + std::to_string(c + 1));
    }
    return out;
}

Matrix pca_reconstruct(const PcaModel& model, const Matrix& scores) {
    return (scores * model.components).rowwise() + model.mean.transpose();
}

SequentialResult sfs(std::size_t m, const SubsetEvaluator& evaluator, std::size_t max_features) {
    SequentialResult result;
    result.mask = SelectionMask(m);
    result.score = -std::numeric_limits<double>::infinity();
    max_features = std::min(max_features, m);
    while (result.mask.count() < max_features) {
        double best_score = -std::numeric_limits<double>::infinity();
        std::size_t best = m;
        for (std::size_t j = 0; j < m; ++j) {
            if (result.mask.test(j)) {
                continue;
            }
            SelectionMask candidate = result.mask;
            candidate.set(j);
            const double s = evaluator(candidate);
            ++result.evaluations;
            if (best == m || s > best_score) {
                best_score = s;
                best = j;
            }
        }
        if (best == m || !(best_score > result.score)) {
            break;
        }
        result.mask.set(best);
        result.score = best_score;
    }
    return result;
}

SequentialResult sbs(std::size_t m, const SubsetEvaluator& evaluator, std::size_t min_features) {
    SequentialResult result;
    result.mask = SelectionMask(m, true);
    result.score = evaluator(result.mask);
    result.evaluations = 1;
    min_features = std::max<std::size_t>(min_features, 1);
    while (result.mask.count() > min_features) {
        double best_score = -std::numeric_limits<double>::infinity();
        std::size_t best = m;
        for (std::size_t j = 0; j < m; ++j) {
            if (!result.mask.test(j)) {
                continue;
            }
            SelectionMask candidate = result.mask;
            candidate.set(j, false);
            const double s = evaluator(candidate);
            ++result.evaluations;
            if (best == m || s > best_score) {
                best_score = s;
                best = j;
            }
        }
        if (best == m || best_score < result.score) {
            break;
        }
        result.mask.set(best, false);
        result.score = best_score;
    }
    return result;
}

double cfs_merit(const std::vector<double>& feature_class_corr, const Matrix& feature_corr,
                 const std::vector<std::size_t>& subset) {
    const double k = static_cast<double>(subset.size());
    if (subset.empty()) {
        return 0.0;
    }
    double rcf = 0.0;
    for (auto i : subset) {
        rcf += feature_class_corr[i];
    }
    rcf /= k;
    double rff = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < subset.size(); ++a) {
        for (std::size_t b = a + 1; b < subset.size(); ++b) {
            rff += feature_corr(static_cast<Eigen::Index>(subset[a]), static_cast<Eigen::Index>(subset[b]));
            ++pairs;
        }
    }
    if (pairs > 0) {
        rff /= static_cast<double>(pairs);
    }
    return k * rcf / std::sqrt(k + k * (k - 1.0) * rff);
}

SelectionMask cfs(const Dataset& dataset) {
    const auto m = static_cast<std::size_t>(dataset.x.cols());
    Vector y(static_cast<Eigen::Index>(dataset.rows()));
    for (std::size_t i = 0; i < dataset.rows(); ++i) {
        y(static_cast<Eigen::Index>(i)) = dataset.labels[i];
    }
    // Class correlations that are not significant at 5% count as zero, so
    // pure-noise columns add nothing to the merit.
    const double df = static_cast<double>(dataset.rows()) - 2.0;
    std::vector<double> rcf(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double r = abs_correlation(dataset.x.col(static_cast<Eigen::Index>(j)), y);
        const double t2 = r < 1.0 ? r * r * df / (1.0 - r * r) : std::numeric_limits<double>::infinity();
        rcf[j] = df > 0.0 && stats::f_survival(1.0, df, t2) <= 0.05 ? r : 0.0;
    }
    // |corr| between every pair of features, zero for constant columns.
    const Matrix centered = dataset.x.rowwise() - dataset.x.colwise().mean();
    const Vector norms = centered.colwise().norm().transpose();
    Matrix corr = centered.transpose() * centered;
    for (Eigen::Index a = 0; a < corr.rows(); ++a) {
        for (Eigen::Index b = 0; b < corr.cols(); ++b) {
            const double d = norms(a) * norms(b);
            corr(a, b) = d > 0.0 ? std::abs(corr(a, b) / d) : 0.0;
        }
    }

    std::vector<std::size_t> selected;
    std::vector<bool> used(m, false);
    double merit = 0.0;
    while (selected.size() < m) {
        double best_merit = -1.0;
        std::size_t best = m;
        for (std::size_t j = 0; j < m; ++j) {
            if (used[j]) {
                continue;
            }
            selected.push_back(j);
            const double candidate = cfs_merit(rcf, corr, selected);
            selected.pop_back();
            if (candidate > best_merit) {
                best_merit = candidate;
                best = j;
            }
        }
        if (best == m || !(best_merit > merit)) {
            break;
        }
        selected.push_back(best);
        used[best] = true;
        merit = best_merit;
    }
    return SelectionMask::from_indices(m, selected);
}

double lasso_lambda_max(const Dataset& dataset) {
    const auto n = static_cast<double>(dataset.rows());
    const Matrix xc = dataset.x.rowwise() - dataset.x.colwise().mean();
    Vector y(static_cast<Eigen::Index>(dataset.rows()));
    for (std::size_t i = 0; i < dataset.rows(); ++i) {
        y(static_cast<Eigen::Index>(i)) = dataset.labels[i];
    }
    y.array() -= y.mean();
    return (xc.transpose() * y).cwiseAbs().maxCoeff() / n;
}

std::vector<double> lasso_lambda_grid(const Dataset& dataset, std::size_t count, double ratio) {
    if (count == 0 || !(ratio > 0.0 && ratio < 1.0)) {
        throw ConfigError("lambda grid needs count >= 1 and ratio in (0, 1)");
    }
    const double top = lasso_lambda_max(dataset);
    std::vector<double> grid;
    for (std::size_t i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
        grid.push_back(top * std::pow(ratio, t));
    }
    return grid;
}

LassoPath lasso_path(const Dataset& dataset, const std::vector<double>& lambdas, double tol,
                     std::size_t max_sweeps) {
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas[i] >= 0.0) || (i > 0 && lambdas[i] > lambdas[i - 1])) {
            throw ConfigError("lambdas must be non-negative and descending");
        }
    }
    const auto n = static_cast<double>(dataset.rows());
    const Vector x_mean = dataset.x.colwise().mean().transpose();
    const Matrix xc = dataset.x.rowwise() - x_mean.transpose();
    Vector y(static_cast<Eigen::Index>(dataset.rows()));
    for (std::size_t i = 0; i < dataset.rows(); ++i) {
        y(static_cast<Eigen::Index>(i)) = dataset.labels[i];
    }
    const double y_mean = y.mean();
    const Vector yc = y.array() - y_mean;
    const Vector col_sq = xc.colwise().squaredNorm().transpose() / n;

    const auto m = xc.cols();
    Vector beta = Vector::Zero(m);
    Vector residual = yc;
    LassoPath path;
    for (double lambda : lambdas) {
        for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
            double max_change = 0.0;
            for (Eigen::Index j = 0; j < m; ++j) {
                if (col_sq(j) <= 0.0) {
                    continue;
                }
                const double old = beta(j);
                const double rho = xc.col(j).dot(residual) / n + col_sq(j) * old;
                const double updated = soft_threshold(rho, lambda) / col_sq(j);
                if (updated != old) {
                    residual -= (updated - old) * xc.col(j);
                    beta(j) = updated;
                    max_change = std::max(max_change, std::abs(updated - old));
                }
            }
            if (max_change < tol) {
                break;
            }
        }
        path.lambdas.push_back(lambda);
        path.coefficients.push_back(beta);
        path.intercepts.push_back(y_mean - x_mean.dot(beta));
    }
    return path;
}

SelectionMask lasso_select(const LassoPath& path, double lambda) {
    if (path.lambdas.empty()) {
        throw ConfigError("empty lasso path");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < path.lambdas.size(); ++i) {
        if (std::abs(path.lambdas[i] - lambda) < std::abs(path.lambdas[best] - lambda)) {
            best = i;
        }
    }
    const Vector& beta = path.coefficients[best];
    SelectionMask mask(static_cast<std::size_t>(beta.size()));
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        mask.set(static_cast<std::size_t>(j), beta(j) != 0.0);
    }
    return mask;
}

double lasso_cv_lambda(const Dataset& dataset, const std::vector<double>& lambdas, std::size_t folds,
                       std::uint64_t seed) {
    if (folds < 2 || folds > dataset.rows()) {
        throw ConfigError("lasso CV needs 2 <= folds <= rows");
    }
    std::vector<std::size_t> order(dataset.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, 0x1a550));
    rng.shuffle(order);
    std::vector<double> error(lambdas.size(), 0.0);
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train;
        std::vector<std::size_t> valid;
        for (std::size_t i = 0; i < order.size(); ++i) {
            (i % folds == f ? valid : train).push_back(order[i]);
        }
        std::sort(train.begin(), train.end());
        std::sort(valid.begin(), valid.end());
        const auto fit = lasso_path(select_rows(dataset, train), lambdas);
        const auto held = select_rows(dataset, valid);
        for (std::size_t l = 0; l < lambdas.size(); ++l) {
            const Vector pred = (held.x * fit.coefficients[l]).array() + fit.intercepts[l];
            for (std::size_t i = 0; i < held.rows(); ++i) {
                const double r = pred(static_cast<Eigen::Index>(i)) - held.labels[i];
                error[l] += r * r;
            }
        }
    }
    return lambdas[static_cast<std::size_t>(std::min_element(error.begin(), error.end()) - error.begin())];
}

}  // namespace gafs
