#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gafs/baselines.hpp"
#include "gafs/classifiers.hpp"
#include "gafs/common.hpp"
#include "gafs/dataset.hpp"
#include "gafs/ga_selector.hpp"
#include "gafs/preprocess.hpp"

namespace gafs {

/// 2x2 counts with kSuccess as the positive class.
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
};

ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& predicted);

// Percentages. An empty denominator yields nullopt rather than 0.
std::optional<double> ppv(const ConfusionMatrix& cm);
std::optional<double> fdr(const ConfusionMatrix& cm);
std::optional<double> accuracy(const ConfusionMatrix& cm);

/// Precision and false discovery rate of the predictions made for one class.
struct ClassMetrics {
    std::optional<double> ppv;
    std::optional<double> fdr;
};

ClassMetrics success_metrics(const ConfusionMatrix& cm);
ClassMetrics failure_metrics(const ConfusionMatrix& cm);

struct RocCurve {
    std::vector<double> fpr;
    std::vector<double> tpr;
    /// Score cutoff of each point (predict positive when score >= cutoff);
    /// the first point uses +infinity.
    std::vector<double> thresholds;
};

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& truth);
double auc(const RocCurve& curve);

/// Writes "fpr,tpr,threshold" rows.
void write_roc_csv(const RocCurve& curve, const std::string& path);

/// What a selector hands to the evaluation classifier: a feature mask, or a
/// fitted projection.
struct SelectorOutput {
    std::optional<SelectionMask> mask;
    std::optional<PcaModel> projection;
    std::vector<GenerationRecord> trajectory;
    nlohmann::json details = nlohmann::json::object();

    std::size_t n_selected() const;
};

/// Runs on the training partition only.
using Selector = std::function<SelectorOutput(const Dataset& train)>;

struct MethodSpec {
    std::string name;
    Selector select;
    ClassifierKind classifier = ClassifierKind::svm_rbf;
    TrainConfig train;
};

struct MethodRow {
    std::string name;
    std::optional<std::string> error;
    std::size_t n_selected = 0;
    std::vector<std::size_t> selected;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    ConfusionMatrix test_confusion;
    ClassMetrics success;
    ClassMetrics failure;
    std::optional<double> auc;
    RocCurve roc;
    std::vector<GenerationRecord> trajectory;
    nlohmann::json details = nlohmann::json::object();
};

struct ComparisonReport {
    std::vector<MethodRow> rows;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    std::size_t synthetic_rows = 0;
};

void to_json(nlohmann::json& j, const ConfusionMatrix& cm);
void to_json(nlohmann::json& j, const MethodRow& row);
void to_json(nlohmann::json& j, const ComparisonReport& report);

struct CompareOptions {
    /// Applied to the training partition after the split; unset disables it.
    std::optional<SmoteConfig> oversample;
    std::size_t workers = 1;
};

/// Splits once, over-samples the training part only, then for every method
/// selects features on the training part, trains the classifier and scores it
/// on both parts. Train accuracy is measured on the original (non-synthetic)
/// training rows. A failing method yields a row with `error` set.
ComparisonReport compare_methods(const Dataset& dataset, const std::vector<MethodSpec>& methods,
                                 const SplitSpec& split, const CompareOptions& options = {});

/// Row evaluation on an existing partition, used by compare_methods.
MethodRow evaluate_method(const MethodSpec& method, const Dataset& train, const Dataset& test,
                          std::size_t workers = 1);

}  // namespace gafs
