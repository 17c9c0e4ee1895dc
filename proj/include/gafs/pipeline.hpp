#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "gafs/baselines.hpp"
#include "gafs/classifiers.hpp"
#include "gafs/dataset.hpp"
#include "gafs/evaluation.hpp"
#include "gafs/ga_selector.hpp"
#include "gafs/neuro.hpp"
#include "gafs/preprocess.hpp"

namespace gafs {

inline constexpr const char* kToolVersion = "1.0.0";

/// A failure inside a pipeline stage; what() carries the "[stage] " prefix.
class StageError : public std::runtime_error {
public:
    StageError(const std::string& stage, const std::string& message)
        : std::runtime_error("[" + stage + "] " + message), stage_(stage) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct DataSource {
    /// "secom" (features + labels files) or "csv" (one file with a label column).
    std::string format = "secom";
    std::string features_path;
    std::string labels_path;
    std::string csv_path;
    std::string label_column = "label";
};

struct PreprocessConfig {
    ImputePolicy impute;
    /// Chi-square quantile for outlier removal; unset skips the stage.
    std::optional<double> outlier_quantile = 0.975;
    bool oversample = true;
    SmoteConfig smote;
};

struct BaselineConfig {
    double alpha = 0.05;
    double percentile = 71.0;
    std::size_t pca_components = 48;
    std::size_t lasso_lambdas = 50;
    double lasso_ratio = 1e-3;
    std::size_t lasso_folds = 5;
    /// Cap on the subset size grown by forward selection.
    std::size_t sfs_max_features = 36;
    /// Floor on the subset size shrunk by backward elimination.
    std::size_t sbs_min_features = 1;
};

/// Recognized baseline names.
const std::vector<std::string>& baseline_names();

struct RunConfig {
    DataSource data;
    PreprocessConfig preprocess;
    SplitSpec split;
    GaConfig ga;
    CostConfig cost;
    std::vector<std::string> baselines;
    BaselineConfig baseline;
    /// Classifier preset name (see apply_preset).
    std::string classifier = "gaussian_svm";
    TrainConfig train;
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::size_t checkpoint_every = 0;

    /// Throws ConfigError on any invalid setting or missing input file.
    void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, RunConfig& config);

RunConfig load_run_config(const std::string& path);

/// Per-stage seeds derived from the global seed.
struct StageSeeds {
    std::uint64_t split;
    std::uint64_t smote;
    std::uint64_t ga;
    std::uint64_t cost;
    std::uint64_t classifier;
    std::uint64_t baselines;
};

StageSeeds stage_seeds(std::uint64_t seed);

/// Loaded, imputed, standardized and outlier-filtered data.
struct PreparedData {
    Dataset dataset;
    nlohmann::json report = nlohmann::json::object();
};

PreparedData prepare_data(const RunConfig& config);

/// Outer split with over-sampling applied to the training part only.
struct Partition {
    Dataset train;
    Dataset test;
    std::size_t synthetic_rows = 0;
    nlohmann::json report = nlohmann::json::object();
};

Partition partition_data(const Dataset& dataset, const RunConfig& config);

/// GA + neural-cost selector. `checkpoint_path` (if non-empty) receives the
/// search state every config.checkpoint_every generations.
Selector make_proposed_selector(const RunConfig& config, const std::string& checkpoint_path = {},
                                std::optional<GaCheckpoint> resume = std::nullopt);

Selector make_baseline_selector(const std::string& name, const RunConfig& config);

MethodSpec make_method(const std::string& name, const RunConfig& config);

/// Full flow; writes manifest.json, selected_features.json, metrics.json,
/// roc_<method>.csv, trajectory.csv and timing.json under config.output_dir.
/// `methods` defaults to the proposed method followed by config.baselines.
ComparisonReport run_pipeline(const RunConfig& config, const std::vector<std::string>& methods = {},
                             const std::string& command = "run", bool resume = false);

struct SweepPoint {
    double theta = 0.0;
    double mu = 0.0;
    std::size_t population = 0;
    std::size_t hidden = 0;
};

/// Parameter grid over crossover rate, mutation rate, population size and
/// hidden neurons. Either an explicit list of points (the parameter-study
/// layout: blocks of (theta, mu) with three (population, hidden) rows each)
/// or the full product of the four value lists.
struct SweepGrid {
    std::vector<SweepPoint> points;
    std::vector<double> theta;
    std::vector<double> mu;
    std::vector<std::size_t> population;
    std::vector<std::size_t> hidden;
};

void from_json(const nlohmann::json& j, SweepGrid& grid);
/// The 6 x 3 grid of the published parameter study.
SweepGrid parameter_study_grid();

struct SweepCell {
    SweepPoint point;
    std::optional<std::string> error;
    double best_cost = 0.0;
    double epsilon = 0.0;
    std::size_t n_selected = 0;
    std::size_t nfe = 0;
    std::optional<double> test_accuracy;
};

std::vector<SweepPoint> expand_grid(const SweepGrid& grid);

/// Runs every cell (in parallel up to config.workers) on one shared
/// preprocessed dataset; writes cell_<k>/ artifacts plus sweep.csv and
/// sweep.json.
std::vector<SweepCell> sweep(const RunConfig& config, const SweepGrid& grid);

}  // namespace gafs
