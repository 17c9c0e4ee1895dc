#include "gafs/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace gafs {
namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> percent(std::size_t num, std::size_t den) {
    if (den == 0) {
        return std::nullopt;
    }
    return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

Dataset original_rows(const Dataset& d) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < d.rows(); ++i) {
        if (d.row_origin[i] != kSyntheticRow) {
            keep.push_back(i);
        }
    }
    return keep.size() == d.rows() ? d : select_rows(d, keep);
}

}  // namespace

ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& predicted) {
    if (truth.size() != predicted.size()) {
        throw DataError("truth and prediction lengths differ");
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i], p = predicted[i];
        if ((t != kSuccess && t != kFailure) || (p != kSuccess && p != kFailure)) {
            throw DataError("label outside {0,1}");
        }
        if (t == kSuccess) {
            ++(p == kSuccess ? cm.tp : cm.fn);
        } else {
            ++(p == kSuccess ? cm.fp : cm.tn);
        }
    }
    return cm;
}

std::optional<double> ppv(const ConfusionMatrix& cm) { return percent(cm.tp, cm.tp + cm.fp); }
std::optional<double> fdr(const ConfusionMatrix& cm) { return percent(cm.fp, cm.tp + cm.fp); }
std::optional<double> accuracy(const ConfusionMatrix& cm) { return percent(cm.tp + cm.tn, cm.total()); }

ClassMetrics success_metrics(const ConfusionMatrix& cm) { return {ppv(cm), fdr(cm)}; }

ClassMetrics failure_metrics(const ConfusionMatrix& cm) {
    return {percent(cm.tn, cm.tn + cm.fn), percent(cm.fn, cm.tn + cm.fn)};
}

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& truth) {
    if (scores.size() != truth.size()) {
        throw DataError("scores and labels lengths differ");
    }
    std::size_t pos = 0, neg = 0;
    for (int t : truth) {
        if (t == kSuccess) {
            ++pos;
        } else if (t == kFailure) {
            ++neg;
        } else {
            throw DataError("label outside {0,1}");
        }
    }
    if (pos == 0 || neg == 0) {
        throw DataError("ROC needs both classes");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.fpr.push_back(0.0);
    curve.tpr.push_back(0.0);
    curve.thresholds.push_back(std::numeric_limits<double>::infinity());
    std::size_t tp = 0, fp = 0;
    for (std::size_t k = 0; k < order.size();) {
        const double s = scores[order[k]];
        // Tied scores form a single step.
        for (; k < order.size() && scores[order[k]] == s; ++k) {
            ++(truth[order[k]] == kSuccess ? tp : fp);
        }
        curve.fpr.push_back(static_cast<double>(fp) / static_cast<double>(neg));
        curve.tpr.push_back(static_cast<double>(tp) / static_cast<double>(pos));
        curve.thresholds.push_back(s);
    }
    return curve;
}

double auc(const RocCurve& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.fpr.size(); ++i) {
        area += (curve.fpr[i] - curve.fpr[i - 1]) * (curve.tpr[i] + curve.tpr[i - 1]) / 2.0;
    }
    return area;
}

void write_roc_csv(const RocCurve& curve, const std::string& path) {
    std::ostringstream out;
    out.precision(17);
    out << "fpr,tpr,threshold\n";
    for (std::size_t i = 0; i < curve.fpr.size(); ++i) {
        out << curve.fpr[i] << ',' << curve.tpr[i] << ',' << curve.thresholds[i] << '\n';
    }
    write_file_atomic(path, out.str());
}

std::size_t SelectorOutput::n_selected() const {
    if (projection) {
        return static_cast<std::size_t>(projection->components.rows());
    }
    return mask ? mask->count() : 0;
}

void to_json(nlohmann::json& j, const ConfusionMatrix& cm) {
    j = {{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}};
}

void to_json(nlohmann::json& j, const MethodRow& row) {
    j = {{"method", row.name}};
    if (row.error) {
        j["error"] = *row.error;
        return;
    }
    j["n_selected"] = row.n_selected;
    j["selected"] = row.selected;
    j["train_accuracy"] = row.train_accuracy;
    j["test_accuracy"] = row.test_accuracy;
    j["confusion"] = row.test_confusion;
    j["ppv"] = optional_json(row.success.ppv);
    j["fdr"] = optional_json(row.failure.fdr);
    j["success"] = {{"ppv", optional_json(row.success.ppv)}, {"fdr", optional_json(row.success.fdr)}};
    j["failure"] = {{"ppv", optional_json(row.failure.ppv)}, {"fdr", optional_json(row.failure.fdr)}};
    j["auc"] = optional_json(row.auc);
    if (!row.details.empty()) {
        j["details"] = row.details;
    }
}

void to_json(nlohmann::json& j, const ComparisonReport& report) {
    j = {{"train_rows", report.train_rows},
         {"test_rows", report.test_rows},
         {"synthetic_rows", report.synthetic_rows},
         {"methods", report.rows}};
}

MethodRow evaluate_method(const MethodSpec& method, const Dataset& train, const Dataset& test, std::size_t workers) {
    MethodRow row;
    row.name = method.name;
    try {
        SelectorOutput out = method.select(train);
        Dataset train_view, test_view;
        if (out.projection) {
            train_view = pca_transform(*out.projection, train);
            test_view = pca_transform(*out.projection, test);
        } else if (out.mask) {
            train_view = project(train, *out.mask);
            test_view = project(test, *out.mask);
            row.selected = out.mask->indices();
        } else {
            train_view = train;
            test_view = test;
            row.selected.resize(train.features());
            std::iota(row.selected.begin(), row.selected.end(), 0);
        }
        row.n_selected = out.projection || out.mask ? out.n_selected() : train.features();
        row.trajectory = std::move(out.trajectory);
        row.details = std::move(out.details);

        TrainConfig tc = method.train;
        tc.workers = workers;
        const TrainedClassifier model = gafs::train(method.classifier, train_view, tc);

        const Dataset fit_rows = original_rows(train_view);
        const Prediction on_train = predict(model, fit_rows.x, workers);
        row.train_accuracy = accuracy(confusion(fit_rows.labels, on_train.labels)).value_or(0.0);

        const Prediction on_test = predict(model, test_view.x, workers);
        row.test_confusion = confusion(test_view.labels, on_test.labels);
        row.test_accuracy = accuracy(row.test_confusion).value_or(0.0);
        row.success = success_metrics(row.test_confusion);
        row.failure = failure_metrics(row.test_confusion);
        if (test_view.count_label(kSuccess) > 0 && test_view.count_label(kFailure) > 0) {
            row.roc = roc_curve(on_test.scores, test_view.labels);
            row.auc = auc(row.roc);
        }
    } catch (const std::exception& e) {
        MethodRow failed;
        failed.name = method.name;
        failed.error = e.what();
        return failed;
    }
    return row;
}

ComparisonReport compare_methods(const Dataset& dataset, const std::vector<MethodSpec>& methods,
                                 const SplitSpec& split, const CompareOptions& options) {
    if (methods.empty()) {
        throw ConfigError("no methods to compare");
    }
    auto [train, test] = stratified_split(dataset, split);
    ComparisonReport report;
    report.train_rows = train.rows();
    report.test_rows = test.rows();
    if (options.oversample) {
        OversampleResult os = dbsmote_oversample(train, *options.oversample);
        report.synthetic_rows = os.synthetic_rows;
        train = std::move(os.dataset);
    }
    report.rows.resize(methods.size());
    // Parallel across rows; each row then evaluates serially.
    const std::size_t outer = std::min(options.workers, methods.size());
    const std::size_t inner = outer > 1 ? 1 : options.workers;
    parallel_for(methods.size(), outer, [&](std::size_t i) {
        report.rows[i] = evaluate_method(methods[i], train, test, inner);
    });
    return report;
}

}  // namespace gafs
