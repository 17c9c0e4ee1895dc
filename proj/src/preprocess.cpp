#include "gafs/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "gafs/special_functions.hpp"

namespace gafs {
namespace {

constexpr double kMaxCondition = 1e12;

bool factor_ok(const Eigen::LLT<Matrix>& llt) {
    return llt.info() == Eigen::Success && llt.rcond() >= 1.0 / kMaxCondition;
}

std::vector<std::size_t> rows_with_label(const Dataset& dataset, int label) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < dataset.rows(); ++i) {
        if (dataset.labels[i] == label) {
            rows.push_back(i);
        }
    }
    return rows;
}

Matrix pairwise_distances(const Matrix& points) {
    const auto n = points.rows();
    const Vector sq = points.rowwise().squaredNorm();
    Matrix d = (sq.replicate(1, n) + sq.transpose().replicate(n, 1) - 2.0 * points * points.transpose())
                   .cwiseMax(0.0)
                   .cwiseSqrt();
    d.diagonal().setZero();
    return d;
}

// Indices of the k nearest other points to `i` (ties by lower index).
std::vector<std::size_t> nearest(const Matrix& dist, std::size_t i, std::size_t k,
                                 const std::vector<std::size_t>& candidates) {
    std::vector<std::size_t> others;
    for (auto c : candidates) {
        if (c != i) {
            others.push_back(c);
        }
    }
    k = std::min(k, others.size());
    const auto row = static_cast<Eigen::Index>(i);
    std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k), others.end(),
                      [&](std::size_t a, std::size_t b) {
                          const double da = dist(row, static_cast<Eigen::Index>(a));
                          const double db = dist(row, static_cast<Eigen::Index>(b));
                          return da < db || (da == db && a < b);
                      });
    others.resize(k);
    return others;
}

}  // namespace

void to_json(nlohmann::json& j, const OutlierReport& report) {
    j = nlohmann::json{{"threshold", report.threshold},
                       {"quantile", report.quantile},
                       {"regularization", report.regularization},
                       {"flagged", report.flagged},
                       {"distances", report.distances}};
}

ScatterMatrix scatter_matrix(const Dataset& dataset) {
    if (dataset.has_missing()) {
        throw DataError("scatter matrix requires an imputed dataset");
    }
    const auto n = dataset.x.rows();
    const auto m = dataset.x.cols();
    if (n < 2) {
        throw DataError("scatter matrix requires at least two rows");
    }
    ScatterMatrix out;
    out.mean = dataset.x.colwise().mean().transpose();
    const Matrix centered = dataset.x.rowwise() - out.mean.transpose();
    out.s = Matrix::Zero(m, m);
    out.s.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), 1.0 / static_cast<double>(n - 1));
    out.s = out.s.selfadjointView<Eigen::Lower>();

    out.factor.compute(out.s);
    if (factor_ok(out.factor)) {
        out.inverse_ok = true;
        return out;
    }
    double scale = out.s.trace() / static_cast<double>(m);
    if (!(scale > 0.0)) {
        scale = 1.0;
    }
    for (double factor : {1e-8, 1e-6, 1e-4, 1e-2}) {
        const double ridge = factor * scale;
        Matrix regularized = out.s;
        regularized.diagonal().array() += ridge;
        out.factor.compute(regularized);
        if (factor_ok(out.factor)) {
            out.ridge = ridge;
            out.inverse_ok = true;
            return out;
        }
    }
    out.inverse_ok = false;
    return out;
}

std::vector<double> mahalanobis_distances(const Dataset& dataset, const ScatterMatrix& scatter,
                                          std::size_t workers) {
    if (!scatter.inverse_ok) {
        throw NumericError("scatter matrix could not be inverted");
    }
    if (scatter.mean.size() != dataset.x.cols()) {
        throw DataError("dimension mismatch between dataset and scatter matrix");
    }
    std::vector<double> distances(dataset.rows());
    const Matrix& l = scatter.factor.matrixLLT();
    constexpr std::size_t kBlock = 256;
    const std::size_t blocks = (dataset.rows() + kBlock - 1) / kBlock;
    parallel_for(blocks, workers, [&](std::size_t b) {
        const auto begin = static_cast<Eigen::Index>(b * kBlock);
        const auto count = std::min<Eigen::Index>(static_cast<Eigen::Index>(kBlock), dataset.x.rows() - begin);
        Matrix diff = (dataset.x.middleRows(begin, count).rowwise() - scatter.mean.transpose()).transpose();
        l.triangularView<Eigen::Lower>().solveInPlace(diff);
        for (Eigen::Index i = 0; i < count; ++i) {
            distances[static_cast<std::size_t>(begin + i)] = diff.col(i).squaredNorm();
        }
    });
    return distances;
}

std::pair<Dataset, OutlierReport> remove_outliers(const Dataset& dataset, double alpha_quantile,
                                                  std::size_t workers) {
    if (!(alpha_quantile > 0.0 && alpha_quantile < 1.0)) {
        throw ConfigError("outlier quantile must be in (0, 1)");
    }
    const auto scatter = scatter_matrix(dataset);
    OutlierReport report;
    report.quantile = alpha_quantile;
    report.regularization = scatter.ridge;
    report.distances = mahalanobis_distances(dataset, scatter, workers);
    report.threshold = stats::chi_square_quantile(static_cast<double>(dataset.features()), alpha_quantile);
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < report.distances.size(); ++i) {
        if (report.distances[i] > report.threshold) {
            report.flagged.push_back(i);
        } else {
            keep.push_back(i);
        }
    }
    if (keep.empty()) {
        throw DataError("every row was flagged as an outlier; check feature scaling");
    }
    if (report.flagged.empty()) {
        return {dataset, std::move(report)};
    }
    return {select_rows(dataset, keep), std::move(report)};
}

void SmoteConfig::validate() const {
    if (!(target_minority_ratio > 0.0 && target_minority_ratio <= 1.0)) {
        throw ConfigError("target_minority_ratio must be in (0, 1]");
    }
    if (neighbors == 0 || dbscan_min_pts == 0) {
        throw ConfigError("neighbors and dbscan_min_pts must be positive");
    }
    if (dbscan_eps && !(*dbscan_eps > 0.0)) {
        throw ConfigError("dbscan_eps must be positive");
    }
}

std::vector<int> dbscan(const Matrix& points, double eps, std::size_t min_pts) {
    const auto n = static_cast<std::size_t>(points.rows());
    const Matrix dist = pairwise_distances(points);
    std::vector<std::vector<std::size_t>> neighborhoods(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <= eps) {
                neighborhoods[i].push_back(j);
            }
        }
    }
    constexpr int kUnvisited = -2;
    constexpr int kNoise = -1;
    std::vector<int> label(n, kUnvisited);
    int cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (label[i] != kUnvisited) {
            continue;
        }
        if (neighborhoods[i].size() < min_pts) {
            label[i] = kNoise;
            continue;
        }
        label[i] = cluster;
        std::deque<std::size_t> frontier(neighborhoods[i].begin(), neighborhoods[i].end());
        while (!frontier.empty()) {
            const auto q = frontier.front();
            frontier.pop_front();
            if (label[q] == kNoise) {
                label[q] = cluster;
            }
            if (label[q] != kUnvisited) {
                continue;
            }
            label[q] = cluster;
            if (neighborhoods[q].size() >= min_pts) {
                frontier.insert(frontier.end(), neighborhoods[q].begin(), neighborhoods[q].end());
            }
        }
        ++cluster;
    }
    return label;
}

OversampleResult dbsmote_oversample(const Dataset& dataset, const SmoteConfig& config) {
    config.validate();
    dataset.validate();
    const std::size_t n_failure = dataset.count_label(kFailure);
    const std::size_t n_success = dataset.count_label(kSuccess);
    const int minority_label = n_failure <= n_success ? kFailure : kSuccess;
    const std::size_t n_min = std::min(n_failure, n_success);
    const std::size_t n_maj = std::max(n_failure, n_success);
    const std::size_t n = dataset.rows();
    if (n_min == 0) {
        throw DataError("minority class has no members");
    }

    // Smallest s with (n_min + s) / (n + s) >= ratio, capped at class balance.
    const double r = config.target_minority_ratio;
    std::size_t needed = n_maj - n_min;
    if (r < 1.0) {
        const double exact = (r * static_cast<double>(n) - static_cast<double>(n_min)) / (1.0 - r);
        const double s = std::ceil(exact - 1e-9);
        needed = s <= 0.0 ? 0 : std::min(needed, static_cast<std::size_t>(s));
    }

    OversampleResult result;
    result.dataset = dataset;
    if (needed == 0) {
        return result;
    }

    const auto minority_rows = rows_with_label(dataset, minority_label);
    Matrix points(static_cast<Eigen::Index>(n_min), dataset.x.cols());
    for (std::size_t i = 0; i < n_min; ++i) {
        points.row(static_cast<Eigen::Index>(i)) = dataset.x.row(static_cast<Eigen::Index>(minority_rows[i]));
    }
    const Matrix dist = pairwise_distances(points);
    std::vector<std::size_t> all(n_min);
    std::iota(all.begin(), all.end(), std::size_t{0});

    // Groups of local indices that synthetic rows may interpolate within.
    std::vector<std::vector<std::size_t>> groups;
    if (n_min > config.dbscan_min_pts) {
        double eps = 0.0;
        if (config.dbscan_eps) {
            eps = *config.dbscan_eps;
        } else {
            std::vector<double> kdist;
            for (std::size_t i = 0; i < n_min; ++i) {
                const auto nn = nearest(dist, i, config.dbscan_min_pts, all);
                kdist.push_back(dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(nn.back())));
            }
            eps = median(kdist);
        }
        result.eps = eps;
        if (eps > 0.0) {
            const auto labels = dbscan(points, eps, config.dbscan_min_pts);
            const int clusters = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
            groups.resize(static_cast<std::size_t>(std::max(clusters, 0)));
            for (std::size_t i = 0; i < n_min; ++i) {
                if (labels[i] >= 0) {
                    groups[static_cast<std::size_t>(labels[i])].push_back(i);
                }
            }
        }
    }
    result.clusters = groups.size();
    if (groups.empty()) {
        result.fallback = true;
        groups.push_back(all);
    }

    // Owner group of each seed point.
    std::vector<std::pair<std::size_t, std::size_t>> seeds;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (auto i : groups[g]) {
            seeds.emplace_back(g, i);
        }
    }

    Rng rng(derive_seed(config.seed, 0xd85));
    Matrix synthetic(static_cast<Eigen::Index>(needed), dataset.x.cols());
    for (std::size_t s = 0; s < needed; ++s) {
        const auto [g, a] = seeds[rng.index(seeds.size())];
        const auto nn = nearest(dist, a, config.neighbors, groups[g]);
        const std::size_t b = nn.empty() ? a : nn[rng.index(nn.size())];
        const double t = rng.uniform();
        const auto pa = points.row(static_cast<Eigen::Index>(a));
        const auto pb = points.row(static_cast<Eigen::Index>(b));
        synthetic.row(static_cast<Eigen::Index>(s)) = pa + t * (pb - pa);
    }

    Dataset extra;
    extra.x = std::move(synthetic);
    extra.missing = MissingMask::Constant(extra.x.rows(), extra.x.cols(), false);
    extra.labels.assign(needed, minority_label);
    extra.row_origin.assign(needed, kSyntheticRow);
    extra.feature_names = dataset.feature_names;
    result.dataset = append_rows(dataset, extra);
    result.synthetic_rows = needed;
    return result;
}

}  // namespace gafs
