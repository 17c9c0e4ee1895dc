#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gafs/common.hpp"
#include "gafs/dataset.hpp"

namespace gafs {

/// Sample covariance of the feature columns plus the factorization used for
/// distance evaluation. `ridge` is the multiple of the identity added to make
/// the factorization well conditioned (0 when none was needed).
struct ScatterMatrix {
    Matrix s;
    Vector mean;
    bool inverse_ok = false;
    double ridge = 0.0;
    Eigen::LLT<Matrix> factor;
};

struct OutlierReport {
    std::vector<double> distances;
    double threshold = 0.0;
    double quantile = 0.0;
    std::vector<std::size_t> flagged;
    double regularization = 0.0;
};

void to_json(nlohmann::json& j, const OutlierReport& report);

ScatterMatrix scatter_matrix(const Dataset& dataset);

/// Squared Mahalanobis distance of every row from the scatter mean.
std::vector<double> mahalanobis_distances(const Dataset& dataset, const ScatterMatrix& scatter,
                                          std::size_t workers = 1);

/// Removes rows whose squared distance strictly exceeds the chi-square
/// quantile with m degrees of freedom. Single pass.
std::pair<Dataset, OutlierReport> remove_outliers(const Dataset& dataset, double alpha_quantile,
                                                  std::size_t workers = 1);

struct SmoteConfig {
    double target_minority_ratio = 0.4;
    std::size_t neighbors = 5;
    /// DBSCAN radius; unset selects the median k-distance of minority rows.
    std::optional<double> dbscan_eps;
    std::size_t dbscan_min_pts = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct OversampleResult {
    Dataset dataset;
    std::size_t synthetic_rows = 0;
    std::size_t clusters = 0;
    double eps = 0.0;
    /// True when density clustering was not possible and plain
    /// nearest-neighbor interpolation was used instead.
    bool fallback = false;
};

/// Density-based synthetic minority over-sampling. Synthetic rows are convex
/// combinations of two minority rows from the same DBSCAN cluster and carry
/// the minority label with row_origin = kSyntheticRow. Original rows are
/// never modified.
OversampleResult dbsmote_oversample(const Dataset& dataset, const SmoteConfig& config);

/// DBSCAN labels (cluster id >= 0, or -1 for noise) of the given points.
std::vector<int> dbscan(const Matrix& points, double eps, std::size_t min_pts);

}  // namespace gafs
