// gafs command-line driver.
//
//   gafs run --config run.json [--seed N] [--out DIR] [--omega W] [--pop P] [--iters I] [--workers K]
//
// Exit status: 0 ok, 2 configuration error, 3 runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gafs/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<double> omega;
    std::optional<std::size_t> pop;
    std::optional<std::size_t> iters;
    std::optional<std::size_t> workers;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON run configuration")->required();
    cmd->add_option("--seed", flags.seed, "Global seed");
    cmd->add_option("--out", flags.out, "Output directory");
    cmd->add_option("--omega", flags.omega, "Feature-count penalty weight");
    cmd->add_option("--pop", flags.pop, "GA population size");
    cmd->add_option("--iters", flags.iters, "GA iteration limit");
    cmd->add_option("--workers", flags.workers, "Worker threads");
}

gafs::RunConfig resolve(const CommonFlags& flags) {
    gafs::RunConfig config = gafs::load_run_config(flags.config_path);
    if (flags.seed) config.seed = *flags.seed;
    if (flags.out) config.output_dir = *flags.out;
    if (flags.omega) config.cost.omega = *flags.omega;
    if (flags.pop) config.ga.population_size = *flags.pop;
    if (flags.iters) config.ga.max_iterations = *flags.iters;
    if (flags.workers) config.workers = *flags.workers;
    config.validate();
    return config;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Accepts a selected_features.json (picking `method`) or a bare index array.
gafs::SelectionMask read_selection(const std::string& path, const std::string& method, std::size_t m) {
    std::ifstream in(path);
    if (!in) {
        throw gafs::ConfigError("cannot open selection file: " + path);
    }
    const json j = json::parse(in);
    std::vector<std::size_t> indices;
    if (j.is_array()) {
        indices = j.get<std::vector<std::size_t>>();
    } else if (j.contains(method) && j.at(method).contains("indices")) {
        indices = j.at(method).at("indices").get<std::vector<std::size_t>>();
    } else {
        throw gafs::ConfigError("selection file has no indices for method '" + method + "'");
    }
    for (auto i : indices) {
        if (i >= m) {
            throw gafs::ConfigError("selected index " + std::to_string(i) + " is out of range");
        }
    }
    return gafs::SelectionMask::from_indices(m, indices);
}

int cmd_preprocess(const gafs::RunConfig& config) {
    const auto prepared = gafs::prepare_data(config);
    const fs::path dir(config.output_dir);
    fs::create_directories(dir);
    gafs::write_csv(prepared.dataset, (dir / "preprocessed.csv.tmp").string());
    fs::rename(dir / "preprocessed.csv.tmp", dir / "preprocessed.csv");
    json report = {{"tool", "gafs"}, {"version", gafs::kToolVersion}, {"command", "preprocess"},
                   {"seed", config.seed}, {"preprocess", prepared.report}};
    gafs::write_file_atomic((dir / "preprocess.json").string(), dump(report));
    std::cout << "rows " << prepared.dataset.rows() << ", features " << prepared.dataset.features() << "\n";
    return kExitOk;
}

int cmd_select(const gafs::RunConfig& config, bool resume) {
    const fs::path dir(config.output_dir);
    const std::string checkpoint = (dir / "checkpoint.json").string();
    std::optional<gafs::GaCheckpoint> state;
    if (resume && fs::is_regular_file(checkpoint)) {
        std::ifstream in(checkpoint);
        state = json::parse(in).get<gafs::GaCheckpoint>();
    }
    const auto prepared = gafs::prepare_data(config);
    const auto part = gafs::partition_data(prepared.dataset, config);
    gafs::SelectorOutput out;
    try {
        out = gafs::make_proposed_selector(config, checkpoint, state)(part.train);
    } catch (const gafs::ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw gafs::StageError("select", e.what());
    }
    std::vector<std::string> names;
    for (auto i : out.mask->indices()) {
        names.push_back(prepared.dataset.feature_names[i]);
    }
    json selected = {{"proposed",
                      {{"method", "proposed"},
                       {"n_selected", out.mask->count()},
                       {"indices", out.mask->indices()},
                       {"names", names},
                       {"details", out.details}}}};
    std::ostringstream csv;
    csv.precision(17);
    csv << "iteration,best_cost,nfe\n";
    for (const auto& r : out.trajectory) {
        csv << r.iteration << ',' << r.best_cost << ',' << r.nfe << '\n';
    }
    json echo = config;
    echo.erase("output_dir");
    echo.erase("workers");
    json manifest = {{"tool", "gafs"}, {"version", gafs::kToolVersion}, {"command", "select"},
                     {"seed", config.seed}, {"config", echo}, {"preprocess", prepared.report},
                     {"partition", part.report}, {"ga", out.details}};
    gafs::write_file_atomic((dir / "selected_features.json").string(), dump(selected));
    gafs::write_file_atomic((dir / "trajectory.csv").string(), csv.str());
    gafs::write_file_atomic((dir / "manifest.json").string(), dump(manifest));
    std::cout << "selected " << out.mask->count() << " features, best cost "
              << out.details.at("best_cost").get<double>() << "\n";
    return kExitOk;
}

int cmd_evaluate(const gafs::RunConfig& config, const std::string& selection_path, const std::string& method,
                 const std::string& model_path) {
    const auto prepared = gafs::prepare_data(config);
    const auto part = gafs::partition_data(prepared.dataset, config);
    const fs::path dir(config.output_dir);

    gafs::MethodSpec spec = gafs::make_method("all_features", config);
    spec.name = "evaluate";
    if (!selection_path.empty()) {
        const auto mask = read_selection(selection_path, method, part.train.features());
        spec.select = [mask](const gafs::Dataset&) {
            gafs::SelectorOutput out;
            out.mask = mask;
            return out;
        };
    }
    gafs::MethodRow row;
    if (!model_path.empty()) {
        std::ifstream in(model_path);
        if (!in) {
            throw gafs::ConfigError("cannot open model file: " + model_path);
        }
        const auto model = json::parse(in).get<gafs::TrainedClassifier>();
        const auto selected = spec.select(part.train);
        const gafs::Dataset test = selected.mask ? gafs::project(part.test, *selected.mask) : part.test;
        const auto pred = gafs::predict(model, test.x, config.workers);
        row.name = spec.name;
        row.n_selected = test.features();
        row.selected = selected.mask ? selected.mask->indices() : std::vector<std::size_t>{};
        row.test_confusion = gafs::confusion(test.labels, pred.labels);
        row.test_accuracy = gafs::accuracy(row.test_confusion).value_or(0.0);
        row.success = gafs::success_metrics(row.test_confusion);
        row.failure = gafs::failure_metrics(row.test_confusion);
        row.roc = gafs::roc_curve(pred.scores, test.labels);
        row.auc = gafs::auc(row.roc);
    } else {
        row = gafs::evaluate_method(spec, part.train, part.test, config.workers);
        if (row.error) {
            throw gafs::StageError("evaluate", *row.error);
        }
        const auto selected = spec.select(part.train);
        const gafs::Dataset train = selected.mask ? gafs::project(part.train, *selected.mask) : part.train;
        gafs::TrainConfig tc = spec.train;
        tc.workers = config.workers;
        const auto model = gafs::train(spec.classifier, train, tc);
        gafs::write_file_atomic((dir / "model.json").string(), json(model).dump() + "\n");
    }
    gafs::ComparisonReport report;
    report.train_rows = part.report.at("train_rows").get<std::size_t>();
    report.test_rows = part.test.rows();
    report.synthetic_rows = part.synthetic_rows;
    report.rows.push_back(row);
    if (row.auc) {
        gafs::write_roc_csv(row.roc, (dir / "roc_evaluate.csv").string());
    }
    gafs::write_file_atomic((dir / "metrics.json").string(), dump(report));
    std::cout << "test accuracy " << row.test_accuracy << "%\n";
    return kExitOk;
}

void print_rows(const gafs::ComparisonReport& report) {
    for (const auto& row : report.rows) {
        if (row.error) {
            std::cout << row.name << ": error: " << *row.error << "\n";
        } else {
            std::cout << row.name << ": " << row.n_selected << " features, train " << row.train_accuracy
                      << "%, test " << row.test_accuracy << "%\n";
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Genetic-algorithm wrapper feature selection with a neural cost"};
    app.require_subcommand(1);

    CommonFlags flags;
    bool resume = false;
    std::string selection, selection_method = "proposed", model_path, grid_path;
    std::vector<std::string> methods;

    auto* preprocess = app.add_subcommand("preprocess", "Load, impute, standardize and filter outliers");
    add_common(preprocess, flags);

    auto* select = app.add_subcommand("select", "Run the GA feature selection on the training partition");
    add_common(select, flags);
    select->add_flag("--resume", resume, "Continue from <out>/checkpoint.json when present");

    auto* evaluate = app.add_subcommand("evaluate", "Train and score the classifier on a feature selection");
    add_common(evaluate, flags);
    evaluate->add_option("--selection", selection, "selected_features.json or a JSON index array");
    evaluate->add_option("--method", selection_method, "Entry to read from the selection file");
    evaluate->add_option("--model", model_path, "Score a saved model.json instead of training");

    auto* compare = app.add_subcommand("compare", "Compare the proposed method with baseline selectors");
    add_common(compare, flags);
    compare->add_option("--methods", methods, "Methods to run (default: proposed and all baselines)");

    auto* sweep = app.add_subcommand("sweep", "GA parameter grid");
    add_common(sweep, flags);
    sweep->add_option("--grid", grid_path, "Grid JSON (default: the config's \"sweep\" key, else the 6x3 study)");

    auto* run = app.add_subcommand("run", "Full pipeline");
    add_common(run, flags);
    run->add_flag("--resume", resume, "Continue the GA from <out>/checkpoint.json when present");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        const gafs::RunConfig config = resolve(flags);
        if (preprocess->parsed()) {
            return cmd_preprocess(config);
        }
        if (select->parsed()) {
            return cmd_select(config, resume);
        }
        if (evaluate->parsed()) {
            return cmd_evaluate(config, selection, selection_method, model_path);
        }
        if (compare->parsed()) {
            if (methods.empty()) {
                methods.push_back("proposed");
                for (const auto& b : config.baselines.empty() ? std::vector<std::string>{"fwe", "fdr", "percentile",
                                                                                         "pca", "lasso"}
                                                              : config.baselines) {
                    methods.push_back(b);
                }
            }
            print_rows(gafs::run_pipeline(config, methods, "compare"));
            return kExitOk;
        }
        if (sweep->parsed()) {
            gafs::SweepGrid grid = gafs::parameter_study_grid();
            if (!grid_path.empty()) {
                std::ifstream in(grid_path);
                if (!in) {
                    throw gafs::ConfigError("cannot open grid file: " + grid_path);
                }
                grid = json::parse(in).get<gafs::SweepGrid>();
            } else {
                std::ifstream in(flags.config_path);
                const json j = json::parse(in);
                if (j.contains("sweep")) {
                    grid = j.at("sweep").get<gafs::SweepGrid>();
                }
            }
            const auto cells = gafs::sweep(config, grid);
            for (const auto& c : cells) {
                std::cout << c.point.theta << ' ' << c.point.mu << ' ' << c.point.population << ' ' << c.point.hidden
                          << ": " << (c.error ? "error: " + *c.error : std::to_string(c.best_cost)) << "\n";
            }
            return kExitOk;
        }
        print_rows(gafs::run_pipeline(config, {}, "run", resume));
        return kExitOk;
    } catch (const gafs::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
