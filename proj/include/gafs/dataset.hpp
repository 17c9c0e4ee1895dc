#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gafs/common.hpp"

namespace gafs {

/// Class encoding used throughout: the rare fault class is 0.
inline constexpr int kFailure = 0;
inline constexpr int kSuccess = 1;

/// Row provenance marker for synthetic (over-sampled) rows.
inline constexpr std::int64_t kSyntheticRow = -1;

using MissingMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// n observations of m real-valued measurements with binary labels.
///
/// `row_origin` records the index of each row in the originally loaded file
/// (kSyntheticRow for generated rows) so partitions can be audited.
struct Dataset {
    Matrix x;
    std::vector<int> labels;
    std::vector<std::string> feature_names;
    MissingMask missing;
    std::vector<std::int64_t> row_origin;

    std::size_t rows() const { return static_cast<std::size_t>(x.rows()); }
    std::size_t features() const { return static_cast<std::size_t>(x.cols()); }
    bool has_missing() const { return missing.size() > 0 && missing.any(); }
    std::size_t count_label(int label) const;

    /// Throws DataError if shapes or labels are inconsistent.
    void validate() const;
};

/// Builds a dataset from complete data; names default to f0..f{m-1}.
Dataset make_dataset(Matrix x, std::vector<int> labels, std::vector<std::string> feature_names = {});

struct ScalingParams {
    Vector mean;
    Vector stddev;
    std::vector<bool> zero_variance;
};

struct SplitSpec {
    double train_fraction = 0.7;
    bool stratified = true;
    std::uint64_t seed = 0;
};

enum class ImputeKind { column_mean, column_median, drop_feature };

struct ImputePolicy {
    ImputeKind kind = ImputeKind::drop_feature;
    /// Features whose missing fraction exceeds this are dropped (drop_feature only).
    double drop_threshold = 0.4;

    static ImputePolicy mean() { return {ImputeKind::column_mean, 1.0}; }
    static ImputePolicy median_policy() { return {ImputeKind::column_median, 1.0}; }
    static ImputePolicy drop(double threshold) { return {ImputeKind::drop_feature, threshold}; }
};

ImputePolicy parse_impute_policy(const std::string& name, double threshold);

/// Reads the UCI SECOM pair: whitespace-separated features with "NaN" for
/// missing cells, and a labels file of "<-1|1> <timestamp>" records.
/// Label -1 (pass) maps to kSuccess, +1 (fail) to kFailure.
Dataset load_secom(const std::string& features_path, const std::string& labels_path);

/// Reads a header-first CSV. The label column must hold exactly two distinct
/// values; the lexicographically smaller maps to 0 unless `label_map` is given.
Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::map<std::string, int>& label_map = {});

/// Writes features plus a trailing "label" column; missing cells are empty.
void write_csv(const Dataset& dataset, const std::string& path);

Dataset impute_missing(const Dataset& dataset, const ImputePolicy& policy);

std::pair<Dataset, ScalingParams> standardize(const Dataset& dataset);

/// Applies previously fitted scaling (zero-variance features map to 0).
Dataset apply_scaling(const Dataset& dataset, const ScalingParams& params);

std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, const SplitSpec& spec);

/// Row indices of the training part; the remaining rows form the test part.
std::vector<std::size_t> split_train_indices(const std::vector<int>& labels, const SplitSpec& spec);

Dataset project(const Dataset& dataset, const SelectionMask& mask);

Dataset select_rows(const Dataset& dataset, const std::vector<std::size_t>& rows);

/// Row-wise concatenation; feature layouts must match.
Dataset append_rows(const Dataset& top, const Dataset& bottom);

}  // namespace gafs
