#include "gafs/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

namespace gafs {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kProposed = "proposed";

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& section) {
    if (!j.is_object()) {
        throw ConfigError(section + ": expected an object");
    }
    for (const auto& item : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; })) {
            throw ConfigError(section + ": unknown key '" + item.key() + "'");
        }
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key) && !j.at(key).is_null()) {
        out = j.at(key).get<T>();
    }
}

template <typename T>
void read_optional(const json& j, const char* key, std::optional<T>& out) {
    if (j.contains(key)) {
        if (j.at(key).is_null()) {
            out.reset();
        } else {
            out = j.at(key).get<T>();
        }
    }
}

template <typename T>
json optional_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

std::string impute_name(ImputeKind kind) {
    switch (kind) {
        case ImputeKind::column_mean:
            return "mean";
        case ImputeKind::column_median:
            return "median";
        case ImputeKind::drop_feature:
            return "drop_feature";
    }
    return "drop_feature";
}

void parse_ga(const json& j, GaConfig& c) {
    check_keys(j,
               {"population_size", "max_iterations", "crossover_rate", "mutation_rate", "gene_flip_prob",
                "crossover_method_probs", "target_top_half_mass", "boltzmann_form", "nfe_budget", "cache_costs"},
               "ga");
    read(j, "population_size", c.population_size);
    read(j, "max_iterations", c.max_iterations);
    read(j, "crossover_rate", c.crossover_rate);
    read(j, "mutation_rate", c.mutation_rate);
    read_optional(j, "gene_flip_prob", c.gene_flip_prob);
    read(j, "crossover_method_probs", c.crossover_method_probs);
    read(j, "target_top_half_mass", c.target_top_half_mass);
    if (j.contains("boltzmann_form")) {
        const auto form = j.at("boltzmann_form").get<std::string>();
        if (form == "normalized") {
            c.boltzmann_form = BoltzmannForm::normalized;
        } else if (form == "raw") {
            c.boltzmann_form = BoltzmannForm::raw;
        } else {
            throw ConfigError("ga.boltzmann_form must be 'normalized' or 'raw'");
        }
    }
    read_optional(j, "nfe_budget", c.nfe_budget);
    read(j, "cache_costs", c.cache_costs);
}

void parse_cost(const json& j, CostConfig& c) {
    check_keys(j, {"omega", "hidden_dim", "inner_train_fraction", "worst_cost", "lm"}, "cost");
    read(j, "omega", c.omega);
    read(j, "hidden_dim", c.hidden_dim);
    read(j, "inner_train_fraction", c.inner_train_fraction);
    read(j, "worst_cost", c.worst_cost);
    if (j.contains("lm")) {
        const auto& lm = j.at("lm");
        check_keys(lm, {"initial_damping", "damping_up", "damping_down", "max_epochs", "convergence_tol"}, "cost.lm");
        read(lm, "initial_damping", c.lm.initial_damping);
        read(lm, "damping_up", c.lm.damping_up);
        read(lm, "damping_down", c.lm.damping_down);
        read(lm, "max_epochs", c.lm.max_epochs);
        read(lm, "convergence_tol", c.lm.convergence_tol);
    }
}

json cost_json(const CostConfig& c) {
    return {{"omega", c.omega},
            {"hidden_dim", c.hidden_dim},
            {"inner_train_fraction", c.inner_train_fraction},
            {"worst_cost", c.worst_cost},
            {"lm",
             {{"initial_damping", c.lm.initial_damping},
              {"damping_up", c.lm.damping_up},
              {"damping_down", c.lm.damping_down},
              {"max_epochs", c.lm.max_epochs},
              {"convergence_tol", c.lm.convergence_tol}}}};
}

std::string csv_number(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

std::string trajectory_csv(const std::vector<GenerationRecord>& trajectory) {
    std::ostringstream out;
    out << "iteration,best_cost,nfe\n";
    for (const auto& r : trajectory) {
        out << r.iteration << ',' << csv_number(r.best_cost) << ',' << r.nfe << '\n';
    }
    return out.str();
}

json trajectory_json(const std::vector<GenerationRecord>& trajectory) {
    json out = json::array();
    for (const auto& r : trajectory) {
        out.push_back({{"iteration", r.iteration},
                       {"best_cost", r.best_cost},
                       {"nfe", r.nfe},
                       {"beta", r.beta},
                       {"best_selected", r.best_selected}});
    }
    return out;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

template <typename F>
auto stage(const std::string& name, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

// Internal-consistency check: the test partition must hold only original rows.
void assert_no_synthetic(const Dataset& test) {
    for (auto origin : test.row_origin) {
        if (origin == kSyntheticRow) {
            throw StageError("split", "synthetic row found in the test partition");
        }
    }
}

// Stratified k-fold accuracy of the evaluation classifier on the masked columns.
SubsetEvaluator cv_accuracy_evaluator(const Dataset& train, ClassifierKind kind, const TrainConfig& tc,
                                      std::size_t folds, std::uint64_t seed) {
    std::vector<std::size_t> fold_of(train.rows());
    Rng rng(seed);
    for (int label : {kFailure, kSuccess}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < train.rows(); ++i) {
            if (train.labels[i] == label) {
                members.push_back(i);
            }
        }
        rng.shuffle(members);
        for (std::size_t r = 0; r < members.size(); ++r) {
            fold_of[members[r]] = r % folds;
        }
    }
    auto data = std::make_shared<const Dataset>(train);
    return [data, fold_of, kind, tc, folds](const SelectionMask& mask) {
        const Dataset view = project(*data, mask);
        std::size_t correct = 0, total = 0;
        for (std::size_t f = 0; f < folds; ++f) {
            std::vector<std::size_t> fit, held;
            for (std::size_t i = 0; i < view.rows(); ++i) {
                (fold_of[i] == f ? held : fit).push_back(i);
            }
            const Dataset held_rows = select_rows(view, held);
            const auto model = gafs::train(kind, select_rows(view, fit), tc);
            const auto pred = predict(model, held_rows.x);
            for (std::size_t i = 0; i < held.size(); ++i) {
                correct += pred.labels[i] == held_rows.labels[i] ? 1 : 0;
            }
            total += held.size();
        }
        return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
    };
}

SelectorOutput require_mask(SelectionMask mask, const std::string& name) {
    if (mask.none()) {
        throw DataError(name + " selected no features");
    }
    SelectorOutput out;
    out.mask = std::move(mask);
    return out;
}

struct ArtifactSet {
    std::string command;
    json prepare_report;
    json partition_report;
};

void write_artifacts(const RunConfig& config, const ArtifactSet& meta, const ComparisonReport& report,
                     const std::vector<std::string>& feature_names, const json& timing) {
    const fs::path dir(config.output_dir);
    // Neither the output location nor the thread count changes any result.
    json echo = config;
    echo.erase("output_dir");
    echo.erase("workers");
    json manifest = {{"tool", "gafs"},
                     {"version", kToolVersion},
                     {"command", meta.command},
                     {"seed", config.seed},
                     {"config", echo},
                     {"preprocess", meta.prepare_report},
                     {"partition", meta.partition_report}};
    json selected = json::object();
    json methods = json::array();
    for (const auto& row : report.rows) {
        methods.push_back(row.name);
        json entry = {{"method", row.name}};
        if (row.error) {
            entry["error"] = *row.error;
        } else {
            std::vector<std::string> names;
            for (auto i : row.selected) {
                names.push_back(feature_names.at(i));
            }
            entry["n_selected"] = row.n_selected;
            entry["indices"] = row.selected;
            entry["names"] = names;
            if (!row.details.empty()) {
                entry["details"] = row.details;
            }
            if (row.auc) {
                write_roc_csv(row.roc, (dir / ("roc_" + row.name + ".csv")).string());
            }
        }
        if (row.name == kProposed) {
            manifest["ga"] = {{"nfe_used", row.trajectory.empty() ? 0 : row.trajectory.back().nfe},
                              {"trajectory", trajectory_json(row.trajectory)}};
            if (!row.error) {
                write_file_atomic((dir / "trajectory.csv").string(), trajectory_csv(row.trajectory));
            }
        }
        selected[row.name] = std::move(entry);
    }
    manifest["methods"] = methods;
    write_file_atomic((dir / "selected_features.json").string(), dump(selected));
    write_file_atomic((dir / "metrics.json").string(), dump(report));
    write_file_atomic((dir / "manifest.json").string(), dump(manifest));
    write_file_atomic((dir / "timing.json").string(), dump(timing));
}

}  // namespace

const std::vector<std::string>& baseline_names() {
    static const std::vector<std::string> names{"fwe", "fdr", "percentile", "pca", "lasso",
                                                "sfs", "sbs", "cfs", "all_features"};
    return names;
}

void RunConfig::validate() const {
    if (data.format == "secom") {
        if (data.features_path.empty() || data.labels_path.empty()) {
            throw ConfigError("data.features_path and data.labels_path are required for format 'secom'");
        }
        for (const auto& p : {data.features_path, data.labels_path}) {
            if (!fs::is_regular_file(p)) {
                throw ConfigError("dataset file not found: " + p);
            }
        }
    } else if (data.format == "csv") {
        if (data.csv_path.empty()) {
            throw ConfigError("data.csv_path is required for format 'csv'");
        }
        if (!fs::is_regular_file(data.csv_path)) {
            throw ConfigError("dataset file not found: " + data.csv_path);
        }
    } else {
        throw ConfigError("data.format must be 'secom' or 'csv'");
    }
    if (!(preprocess.impute.drop_threshold >= 0.0 && preprocess.impute.drop_threshold <= 1.0)) {
        throw ConfigError("preprocess.drop_threshold must be in [0, 1]");
    }
    if (preprocess.outlier_quantile && !(*preprocess.outlier_quantile > 0.0 && *preprocess.outlier_quantile < 1.0)) {
        throw ConfigError("preprocess.outlier_quantile must be in (0, 1)");
    }
    preprocess.smote.validate();
    if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0)) {
        throw ConfigError("split.train_fraction must be in (0, 1)");
    }
    ga.validate();
    cost.validate();
    for (const auto& b : baselines) {
        const auto& known = baseline_names();
        if (std::find(known.begin(), known.end(), b) == known.end()) {
            throw ConfigError("unknown baseline: " + b);
        }
    }
    if (!(baseline.alpha > 0.0 && baseline.alpha < 1.0)) {
        throw ConfigError("baseline.alpha must be in (0, 1)");
    }
    if (!(baseline.percentile > 0.0 && baseline.percentile <= 100.0)) {
        throw ConfigError("baseline.percentile must be in (0, 100]");
    }
    if (baseline.pca_components == 0 || baseline.lasso_lambdas == 0 || baseline.lasso_folds < 2) {
        throw ConfigError("baseline pca_components and lasso_lambdas must be positive, lasso_folds >= 2");
    }
    if (!(baseline.lasso_ratio > 0.0 && baseline.lasso_ratio < 1.0)) {
        throw ConfigError("baseline.lasso_ratio must be in (0, 1)");
    }
    TrainConfig tc = train;
    apply_preset(classifier, tc);
    tc.validate();
    if (output_dir.empty()) {
        throw ConfigError("output directory must not be empty");
    }
    if (workers == 0) {
        throw ConfigError("workers must be positive");
    }
}

void to_json(json& j, const RunConfig& c) {
    json data = {{"format", c.data.format}};
    if (c.data.format == "csv") {
        data["csv_path"] = c.data.csv_path;
        data["label_column"] = c.data.label_column;
    } else {
        data["features_path"] = c.data.features_path;
        data["labels_path"] = c.data.labels_path;
    }
    json smote = {{"target_minority_ratio", c.preprocess.smote.target_minority_ratio},
                  {"neighbors", c.preprocess.smote.neighbors},
                  {"dbscan_eps", optional_json(c.preprocess.smote.dbscan_eps)},
                  {"dbscan_min_pts", c.preprocess.smote.dbscan_min_pts}};
    json ga = c.ga;
    ga.erase("seed");
    json train = c.train;
    train.erase("seed");
    j = {{"data", data},
         {"preprocess",
          {{"impute", impute_name(c.preprocess.impute.kind)},
           {"drop_threshold", c.preprocess.impute.drop_threshold},
           {"outlier_quantile", optional_json(c.preprocess.outlier_quantile)},
           {"oversample", c.preprocess.oversample},
           {"smote", smote}}},
         {"split", {{"train_fraction", c.split.train_fraction}, {"stratified", c.split.stratified}}},
         {"ga", ga},
         {"cost", cost_json(c.cost)},
         {"baselines", c.baselines},
         {"baseline",
          {{"alpha", c.baseline.alpha},
           {"percentile", c.baseline.percentile},
           {"pca_components", c.baseline.pca_components},
           {"lasso_lambdas", c.baseline.lasso_lambdas},
           {"lasso_ratio", c.baseline.lasso_ratio},
           {"lasso_folds", c.baseline.lasso_folds},
           {"sfs_max_features", c.baseline.sfs_max_features},
           {"sbs_min_features", c.baseline.sbs_min_features}}},
         {"classifier", c.classifier},
         {"train", train},
         {"output_dir", c.output_dir},
         {"seed", c.seed},
         {"workers", c.workers},
         {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const json& j, RunConfig& c) {
    check_keys(j,
               {"data", "preprocess", "split", "ga", "cost", "baselines", "baseline", "classifier", "train",
                "output_dir", "seed", "workers", "checkpoint_every", "sweep"},
               "config");
    if (j.contains("data")) {
        const auto& d = j.at("data");
        check_keys(d, {"format", "features_path", "labels_path", "csv_path", "label_column"}, "data");
        read(d, "format", c.data.format);
        read(d, "features_path", c.data.features_path);
        read(d, "labels_path", c.data.labels_path);
        read(d, "csv_path", c.data.csv_path);
        read(d, "label_column", c.data.label_column);
    }
    if (j.contains("preprocess")) {
        const auto& p = j.at("preprocess");
        check_keys(p, {"impute", "drop_threshold", "outlier_quantile", "oversample", "smote"}, "preprocess");
        std::string impute = impute_name(c.preprocess.impute.kind);
        double threshold = c.preprocess.impute.drop_threshold;
        read(p, "impute", impute);
        read(p, "drop_threshold", threshold);
        c.preprocess.impute = parse_impute_policy(impute, threshold);
        read_optional(p, "outlier_quantile", c.preprocess.outlier_quantile);
        read(p, "oversample", c.preprocess.oversample);
        if (p.contains("smote")) {
            const auto& s = p.at("smote");
            check_keys(s, {"target_minority_ratio", "neighbors", "dbscan_eps", "dbscan_min_pts"}, "preprocess.smote");
            read(s, "target_minority_ratio", c.preprocess.smote.target_minority_ratio);
            read(s, "neighbors", c.preprocess.smote.neighbors);
            read_optional(s, "dbscan_eps", c.preprocess.smote.dbscan_eps);
            read(s, "dbscan_min_pts", c.preprocess.smote.dbscan_min_pts);
        }
    }
    if (j.contains("split")) {
        const auto& s = j.at("split");
        check_keys(s, {"train_fraction", "stratified"}, "split");
        read(s, "train_fraction", c.split.train_fraction);
        read(s, "stratified", c.split.stratified);
    }
    if (j.contains("ga")) {
        parse_ga(j.at("ga"), c.ga);
    }
    if (j.contains("cost")) {
        parse_cost(j.at("cost"), c.cost);
    }
    read(j, "baselines", c.baselines);
    if (j.contains("baseline")) {
        const auto& b = j.at("baseline");
        check_keys(b,
                   {"alpha", "percentile", "pca_components", "lasso_lambdas", "lasso_ratio", "lasso_folds",
                    "sfs_max_features", "sbs_min_features"},
                   "baseline");
        read(b, "alpha", c.baseline.alpha);
        read(b, "percentile", c.baseline.percentile);
        read(b, "pca_components", c.baseline.pca_components);
        read(b, "lasso_lambdas", c.baseline.lasso_lambdas);
        read(b, "lasso_ratio", c.baseline.lasso_ratio);
        read(b, "lasso_folds", c.baseline.lasso_folds);
        read(b, "sfs_max_features", c.baseline.sfs_max_features);
        read(b, "sbs_min_features", c.baseline.sbs_min_features);
    }
    read(j, "classifier", c.classifier);
    if (j.contains("train")) {
        const auto& t = j.at("train");
        check_keys(t,
                   {"knn_k", "knn_uniform", "svm_c", "svm_gamma_rule", "svm_gamma", "svm_tol", "svm_max_iterations",
                    "logistic_l2", "forest_trees", "forest_max_depth", "forest_bootstrap"},
                   "train");
        from_json(t, c.train);
    }
    read(j, "output_dir", c.output_dir);
    read(j, "seed", c.seed);
    read(j, "workers", c.workers);
    read(j, "checkpoint_every", c.checkpoint_every);
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file: " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    RunConfig config;
    try {
        from_json(j, config);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config type error: ") + e.what());
    }
    // Relative dataset paths resolve against the config file's directory.
    const fs::path base = fs::path(path).parent_path();
    for (auto* p : {&config.data.features_path, &config.data.labels_path, &config.data.csv_path}) {
        if (!p->empty() && fs::path(*p).is_relative() && !base.empty()) {
            *p = (base / *p).lexically_normal().string();
        }
    }
    return config;
}

StageSeeds stage_seeds(std::uint64_t seed) {
    return {derive_seed(seed, 1), derive_seed(seed, 2), derive_seed(seed, 3),
            derive_seed(seed, 4), derive_seed(seed, 5), derive_seed(seed, 6)};
}

PreparedData prepare_data(const RunConfig& config) {
    PreparedData out;
    Dataset d = stage("load", [&] {
        return config.data.format == "csv" ? load_csv(config.data.csv_path, config.data.label_column)
                                           : load_secom(config.data.features_path, config.data.labels_path);
    });
    out.report["loaded_rows"] = d.rows();
    out.report["loaded_features"] = d.features();
    out.report["class_counts"] = {{"failure", d.count_label(kFailure)}, {"success", d.count_label(kSuccess)}};

    const std::vector<std::string> before = d.feature_names;
    d = stage("impute", [&] { return impute_missing(d, config.preprocess.impute); });
    std::set<std::string> kept(d.feature_names.begin(), d.feature_names.end());
    std::vector<std::string> dropped;
    for (const auto& name : before) {
        if (!kept.count(name)) {
            dropped.push_back(name);
        }
    }
    out.report["dropped_features"] = dropped;

    auto [scaled, params] = stage("standardize", [&] { return standardize(d); });
    std::size_t constant = 0;
    for (bool z : params.zero_variance) {
        constant += z ? 1 : 0;
    }
    out.report["zero_variance_features"] = constant;
    d = std::move(scaled);

    if (config.preprocess.outlier_quantile) {
        auto [kept_rows, outliers] =
            stage("outliers", [&] { return remove_outliers(d, *config.preprocess.outlier_quantile, config.workers); });
        out.report["outliers"] = {{"removed", outliers.flagged.size()},
                                  {"threshold", outliers.threshold},
                                  {"quantile", outliers.quantile},
                                  {"regularization", outliers.regularization}};
        d = std::move(kept_rows);
    }
    out.report["rows"] = d.rows();
    out.report["features"] = d.features();
    out.dataset = std::move(d);
    return out;
}

Partition partition_data(const Dataset& dataset, const RunConfig& config) {
    const auto seeds = stage_seeds(config.seed);
    Partition out;
    SplitSpec spec = config.split;
    spec.seed = seeds.split;
    std::tie(out.train, out.test) = stage("split", [&] { return stratified_split(dataset, spec); });
    assert_no_synthetic(out.test);
    out.report["train_rows"] = out.train.rows();
    out.report["test_rows"] = out.test.rows();
    if (config.preprocess.oversample) {
        SmoteConfig sc = config.preprocess.smote;
        sc.seed = seeds.smote;
        auto os = stage("oversample", [&] { return dbsmote_oversample(out.train, sc); });
        out.synthetic_rows = os.synthetic_rows;
        out.report["oversample"] = {{"synthetic_rows", os.synthetic_rows},
                                    {"clusters", os.clusters},
                                    {"eps", os.eps},
                                    {"fallback", os.fallback}};
        out.train = std::move(os.dataset);
    }
    out.report["train_class_counts"] = {{"failure", out.train.count_label(kFailure)},
                                        {"success", out.train.count_label(kSuccess)}};
    return out;
}

Selector make_proposed_selector(const RunConfig& config, const std::string& checkpoint_path,
                                std::optional<GaCheckpoint> resume) {
    const auto seeds = stage_seeds(config.seed);
    GaConfig ga = config.ga;
    ga.seed = seeds.ga;
    ga.workers = config.workers;
    const CostConfig cost = config.cost;
    const std::size_t every = config.checkpoint_every;
    return [ga, cost, seed = seeds.cost, checkpoint_path, every, resume](const Dataset& train) {
        GaHooks hooks;
        hooks.resume = resume;
        if (!checkpoint_path.empty() && every > 0) {
            hooks.checkpoint_every = every;
            hooks.on_checkpoint = [checkpoint_path](const GaCheckpoint& cp) {
                write_file_atomic(checkpoint_path, json(cp).dump() + "\n");
            };
        }
        const GaResult result = run_ga(train.features(), ga, make_neural_cost(train, cost, seed), hooks);
        SelectorOutput out;
        out.mask = result.best_mask;
        out.trajectory = result.trajectory;
        out.details = {{"best_cost", result.best_cost.j},
                       {"epsilon", result.best_cost.epsilon},
                       {"nfe_used", result.nfe_used}};
        return out;
    };
}

Selector make_baseline_selector(const std::string& name, const RunConfig& config) {
    const BaselineConfig b = config.baseline;
    const std::uint64_t seed = stage_seeds(config.seed).baselines;
    TrainConfig tc = config.train;
    tc.seed = stage_seeds(config.seed).classifier;
    const ClassifierKind kind = apply_preset(config.classifier, tc);
    if (name == "fwe") {
        return [b](const Dataset& train) { return require_mask(select_fwe(univariate_scores(train), b.alpha), "fwe"); };
    }
    if (name == "fdr") {
        return [b](const Dataset& train) { return require_mask(select_fdr(univariate_scores(train), b.alpha), "fdr"); };
    }
    if (name == "percentile") {
        return [b](const Dataset& train) {
            return require_mask(select_percentile(univariate_scores(train), b.percentile), "percentile");
        };
    }
    if (name == "pca") {
        return [b](const Dataset& train) {
            SelectorOutput out;
            out.projection = pca_fit(train, std::min(b.pca_components, train.features()));
            return out;
        };
    }
    if (name == "lasso") {
        return [b, seed](const Dataset& train) {
            const auto grid = lasso_lambda_grid(train, b.lasso_lambdas, b.lasso_ratio);
            const double lambda = lasso_cv_lambda(train, grid, b.lasso_folds, seed);
            auto out = require_mask(lasso_select(lasso_path(train, grid), lambda), "lasso");
            out.details = {{"lambda", lambda}};
            return out;
        };
    }
    if (name == "sfs") {
        return [b, seed, kind, tc](const Dataset& train) {
            const auto r = sfs(train.features(), cv_accuracy_evaluator(train, kind, tc, 5, seed), b.sfs_max_features);
            auto out = require_mask(r.mask, "sfs");
            out.details = {{"score", r.score}, {"evaluations", r.evaluations}};
            return out;
        };
    }
    if (name == "sbs") {
        return [b, seed, kind, tc](const Dataset& train) {
            const auto r = sbs(train.features(), cv_accuracy_evaluator(train, kind, tc, 5, seed), b.sbs_min_features);
            auto out = require_mask(r.mask, "sbs");
            out.details = {{"score", r.score}, {"evaluations", r.evaluations}};
            return out;
        };
    }
    if (name == "cfs") {
        return [](const Dataset& train) { return require_mask(cfs(train), "cfs"); };
    }
    if (name == "all_features") {
        return [](const Dataset& train) { return require_mask(SelectionMask(train.features(), true), "all_features"); };
    }
    throw ConfigError("unknown method: " + name);
}

MethodSpec make_method(const std::string& name, const RunConfig& config) {
    MethodSpec spec;
    spec.name = name;
    spec.train = config.train;
    spec.train.seed = stage_seeds(config.seed).classifier;
    spec.classifier = apply_preset(config.classifier, spec.train);
    spec.select = name == kProposed ? make_proposed_selector(config) : make_baseline_selector(name, config);
    return spec;
}

ComparisonReport run_pipeline(const RunConfig& config, const std::vector<std::string>& methods,
                              const std::string& command, bool resume) {
    config.validate();
    std::vector<std::string> names = methods;
    if (names.empty()) {
        names.push_back(kProposed);
        names.insert(names.end(), config.baselines.begin(), config.baselines.end());
    }
    std::vector<MethodSpec> specs;
    const std::string checkpoint = (fs::path(config.output_dir) / "checkpoint.json").string();
    for (const auto& name : names) {
        MethodSpec spec = make_method(name, config);
        if (name == kProposed) {
            std::optional<GaCheckpoint> state;
            if (resume && fs::is_regular_file(checkpoint)) {
                std::ifstream in(checkpoint);
                state = json::parse(in).get<GaCheckpoint>();
            }
            spec.select = make_proposed_selector(config, checkpoint, state);
        }
        specs.push_back(std::move(spec));
    }

    json timing = json::object();
    auto t0 = Clock::now();
    PreparedData prepared = prepare_data(config);
    timing["prepare_seconds"] = seconds_since(t0);
    t0 = Clock::now();
    Partition part = partition_data(prepared.dataset, config);
    timing["partition_seconds"] = seconds_since(t0);

    ComparisonReport report;
    report.train_rows = part.report.at("train_rows").get<std::size_t>();
    report.test_rows = part.test.rows();
    report.synthetic_rows = part.synthetic_rows;
    json method_seconds = json::object();
    for (const auto& spec : specs) {
        t0 = Clock::now();
        MethodRow row = evaluate_method(spec, part.train, part.test, config.workers);
        method_seconds[spec.name] = seconds_since(t0);
        if (row.error && spec.name == kProposed) {
            throw StageError("select", *row.error);
        }
        report.rows.push_back(std::move(row));
    }
    timing["methods_seconds"] = method_seconds;

    ArtifactSet meta{command, prepared.report, part.report};
    write_artifacts(config, meta, report, prepared.dataset.feature_names, timing);
    return report;
}

void from_json(const json& j, SweepGrid& grid) {
    check_keys(j, {"points", "theta", "mu", "population", "hidden"}, "sweep");
    grid = SweepGrid{};
    if (j.contains("points")) {
        for (const auto& p : j.at("points")) {
            grid.points.push_back({p.at("theta").get<double>(), p.at("mu").get<double>(),
                                   p.at("population").get<std::size_t>(), p.at("hidden").get<std::size_t>()});
        }
    }
    read(j, "theta", grid.theta);
    read(j, "mu", grid.mu);
    read(j, "population", grid.population);
    read(j, "hidden", grid.hidden);
}

SweepGrid parameter_study_grid() {
    SweepGrid grid;
    const std::vector<std::pair<double, double>> rates{{0.6, 0.2}, {0.6, 0.3}, {0.7, 0.2},
                                                       {0.7, 0.3}, {0.8, 0.2}, {0.8, 0.3}};
    // Each block lists three consecutive population sizes, 50 apart.
    const std::vector<std::size_t> first_pop{50, 200, 300, 450, 550, 650};
    const std::size_t hidden[3] = {10, 15, 20};
    for (std::size_t b = 0; b < rates.size(); ++b) {
        for (std::size_t r = 0; r < 3; ++r) {
            grid.points.push_back({rates[b].first, rates[b].second, first_pop[b] + 50 * r, hidden[r]});
        }
    }
    return grid;
}

std::vector<SweepPoint> expand_grid(const SweepGrid& grid) {
    std::vector<SweepPoint> points = grid.points;
    const bool product = !grid.theta.empty() || !grid.mu.empty() || !grid.population.empty() || !grid.hidden.empty();
    if (product) {
        if (grid.theta.empty() || grid.mu.empty() || grid.population.empty() || grid.hidden.empty()) {
            throw ConfigError("a product grid needs theta, mu, population and hidden lists");
        }
        for (double t : grid.theta) {
            for (double m : grid.mu) {
                for (auto p : grid.population) {
                    for (auto h : grid.hidden) {
                        points.push_back({t, m, p, h});
                    }
                }
            }
        }
    }
    if (points.empty()) {
        throw ConfigError("sweep grid is empty");
    }
    return points;
}

std::vector<SweepCell> sweep(const RunConfig& config, const SweepGrid& grid) {
    config.validate();
    const auto points = expand_grid(grid);
    for (const auto& p : points) {
        RunConfig cell = config;
        cell.ga.crossover_rate = p.theta;
        cell.ga.mutation_rate = p.mu;
        cell.ga.population_size = p.population;
        cell.cost.hidden_dim = p.hidden;
        cell.ga.validate();
        cell.cost.validate();
    }

    const auto t0 = Clock::now();
    const PreparedData prepared = prepare_data(config);
    const Partition part = partition_data(prepared.dataset, config);
    const double shared_seconds = seconds_since(t0);

    std::vector<SweepCell> cells(points.size());
    const std::size_t outer = std::min(config.workers, points.size());
    parallel_for(points.size(), outer, [&](std::size_t k) {
        const auto start = Clock::now();
        RunConfig cell = config;
        cell.ga.crossover_rate = points[k].theta;
        cell.ga.mutation_rate = points[k].mu;
        cell.ga.population_size = points[k].population;
        cell.cost.hidden_dim = points[k].hidden;
        cell.workers = outer > 1 ? 1 : config.workers;
        cell.output_dir = (fs::path(config.output_dir) / ("cell_" + std::to_string(k))).string();

        SweepCell& result = cells[k];
        result.point = points[k];
        MethodRow row = evaluate_method(make_method(kProposed, cell), part.train, part.test, cell.workers);
        if (row.error) {
            result.error = row.error;
        } else {
            result.best_cost = row.details.at("best_cost").get<double>();
            result.epsilon = row.details.at("epsilon").get<double>();
            result.nfe = row.details.at("nfe_used").get<std::size_t>();
            result.n_selected = row.n_selected;
            result.test_accuracy = row.test_accuracy;
        }
        ComparisonReport report;
        report.train_rows = part.report.at("train_rows").get<std::size_t>();
        report.test_rows = part.test.rows();
        report.synthetic_rows = part.synthetic_rows;
        report.rows.push_back(std::move(row));
        ArtifactSet meta{"sweep", prepared.report, part.report};
        write_artifacts(cell, meta, report, prepared.dataset.feature_names,
                        {{"shared_prepare_seconds", shared_seconds}, {"cell_seconds", seconds_since(start)}});
    });

    std::ostringstream csv;
    csv << "theta,mu,population,hidden,best_cost,epsilon,n_selected,nfe,test_accuracy,status\n";
    json rows = json::array();
    for (const auto& c : cells) {
        csv << csv_number(c.point.theta) << ',' << csv_number(c.point.mu) << ',' << c.point.population << ','
            << c.point.hidden << ',';
        json row = {{"theta", c.point.theta},
                    {"mu", c.point.mu},
                    {"population", c.point.population},
                    {"hidden", c.point.hidden}};
        if (c.error) {
            csv << ",,,,,error\n";
            row["error"] = *c.error;
        } else {
            csv << csv_number(c.best_cost) << ',' << csv_number(c.epsilon) << ',' << c.n_selected << ',' << c.nfe
                << ',' << csv_number(c.test_accuracy.value_or(0.0)) << ",ok\n";
            row["best_cost"] = c.best_cost;
            row["epsilon"] = c.epsilon;
            row["n_selected"] = c.n_selected;
            row["nfe"] = c.nfe;
            row["test_accuracy"] = optional_json(c.test_accuracy);
        }
        rows.push_back(std::move(row));
    }
    const fs::path dir(config.output_dir);
    write_file_atomic((dir / "sweep.csv").string(), csv.str());
    write_file_atomic((dir / "sweep.json").string(),
                      dump({{"tool", "gafs"}, {"version", kToolVersion}, {"seed", config.seed}, {"cells", rows}}));
    return cells;
}

}  // namespace gafs
