#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <set>

#include "acceptance/planted.hpp"
#include "doctest.h"
#include "gafs/pipeline.hpp"
#include "unit/helpers.hpp"

using namespace gafs;
namespace fs = std::filesystem;
using gafs::testing::read_text;
using gafs::testing::scratch_dir;
using gafs::testing::write_text;

namespace {

int run_cli(const std::string& args) {
    const std::string command = std::string(GAFS_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Small planted CSV plus a fast configuration next to it.
fs::path small_setup(const std::string& name) {
    const fs::path dir = scratch_dir(name);
    gafs::testing::PlantedSpec spec;
    spec.rows = 160;
    spec.features = 8;
    spec.informative = {1, 4};
    spec.seed = 3;
    write_csv(gafs::testing::planted_dataset(spec), (dir / "data.csv").string());
    const nlohmann::json config = {
        {"data", {{"format", "csv"}, {"csv_path", "data.csv"}, {"label_column", "label"}}},
        {"preprocess", {{"impute", "mean"}, {"smote", {{"target_minority_ratio", 0.3}}}}},
        {"ga", {{"population_size", 8}, {"max_iterations", 3}}},
        {"cost", {{"hidden_dim", 3}, {"lm", {{"max_epochs", 15}}}}},
        {"baselines", {"fwe", "fdr", "lasso", "pca"}},
        {"baseline", {{"pca_components", 3}}},
        {"classifier", "lda"},
        {"seed", 11}};
    write_text(dir / "config.json", config.dump(2));
    return dir;
}

std::vector<std::string> artifact_names(const fs::path& dir) {
    std::vector<std::string> names;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().filename() != "timing.json") {
            names.push_back(fs::relative(entry.path(), dir).string());
        }
    }
    std::sort(names.begin(), names.end());
    return names;
}

void check_identical_trees(const fs::path& a, const fs::path& b) {
    const auto names = artifact_names(a);
    REQUIRE_FALSE(names.empty());
    CHECK(names == artifact_names(b));
    for (const auto& n : names) {
        CAPTURE(n);
        CHECK(read_text(a / n) == read_text(b / n));
    }
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config parsing rejects unknown keys and resolves data paths") {
    const fs::path dir = small_setup("pipeline_config");
    const RunConfig c = load_run_config((dir / "config.json").string());
    CHECK(c.data.csv_path == (dir / "data.csv").string());
    CHECK(c.ga.population_size == 8);
    CHECK(c.cost.hidden_dim == 3);
    CHECK(c.baselines.size() == 4);

    write_text(dir / "typo.json", R"({"data": {"format": "csv", "csv_path": "data.csv"}, "sede": 3})");
    CHECK_THROWS_AS(load_run_config((dir / "typo.json").string()), ConfigError);
    write_text(dir / "bad_baseline.json", R"({"data": {"format": "csv", "csv_path": "data.csv"}, "baselines": ["nope"]})");
    CHECK_THROWS_AS(load_run_config((dir / "bad_baseline.json").string()).validate(), ConfigError);
}

TEST_CASE("stage seeds are distinct") {
    const StageSeeds s = stage_seeds(5);
    const std::set<std::uint64_t> all{s.split, s.smote, s.ga, s.cost, s.classifier, s.baselines};
    CHECK(all.size() == 6);
}

TEST_CASE("missing dataset is a config error with no outputs") {
    const fs::path dir = scratch_dir("pipeline_missing");
    write_text(dir / "config.json", R"({"data": {"format": "csv", "csv_path": "absent.csv"}})");
    CHECK(run_cli("run --config " + (dir / "config.json").string() + " --out " + (dir / "out").string()) == 2);
    CHECK_FALSE(fs::exists(dir / "out"));
    CHECK(run_cli("run") == 2);
}

TEST_CASE("run writes every artifact and is byte-identical across runs") {
    const fs::path dir = small_setup("pipeline_run");
    const std::string cfg = " --config " + (dir / "config.json").string();
    REQUIRE(run_cli("run" + cfg + " --out " + (dir / "a").string()) == 0);
    REQUIRE(run_cli("run" + cfg + " --out " + (dir / "b").string() + " --workers 2") == 0);
    for (const char* f : {"manifest.json", "metrics.json", "selected_features.json", "trajectory.csv",
                          "timing.json", "roc_proposed.csv", "roc_fwe.csv"}) {
        CAPTURE(f);
        CHECK(fs::exists(dir / "a" / f));
    }
    check_identical_trees(dir / "a", dir / "b");

    const auto metrics = nlohmann::json::parse(read_text(dir / "a" / "metrics.json"));
    CHECK(metrics["methods"].size() == 5);
    CHECK(metrics["methods"][0]["method"] == "proposed");

    // Trajectory: header then non-increasing best cost.
    std::istringstream traj(read_text(dir / "a" / "trajectory.csv"));
    std::string line;
    std::getline(traj, line);
    double last = std::numeric_limits<double>::infinity();
    while (std::getline(traj, line)) {
        const auto first = line.find(',');
        const double cost = std::stod(line.substr(first + 1, line.find(',', first + 1) - first - 1));
        CHECK(cost <= last);
        last = cost;
    }
}

TEST_CASE("staged commands chain through the selection file") {
    const fs::path dir = small_setup("pipeline_stages");
    const std::string cfg = " --config " + (dir / "config.json").string();
    const std::string out = " --out " + (dir / "out").string();
    CHECK(run_cli("preprocess" + cfg + out) == 0);
    CHECK(fs::exists(dir / "out" / "preprocessed.csv"));
    CHECK(run_cli("select" + cfg + out) == 0);
    CHECK(fs::exists(dir / "out" / "selected_features.json"));
    CHECK(run_cli("evaluate" + cfg + out + " --selection " + (dir / "out" / "selected_features.json").string()) == 0);
    CHECK(fs::exists(dir / "out" / "model.json"));
    CHECK(run_cli("evaluate" + cfg + out + " --model " + (dir / "out" / "model.json").string() + " --selection " +
                  (dir / "out" / "selected_features.json").string()) == 0);
}

TEST_CASE("checkpoint resume reproduces the uninterrupted run") {
    const fs::path dir = small_setup("pipeline_resume");
    RunConfig c = load_run_config((dir / "config.json").string());
    c.checkpoint_every = 1;
    c.ga.max_iterations = 4;
    c.output_dir = (dir / "full").string();
    run_pipeline(c, {"proposed"});
    // Keep the checkpoint from iteration 2 as if the run had stopped there.
    c.ga.max_iterations = 2;
    c.output_dir = (dir / "partial").string();
    run_pipeline(c, {"proposed"});
    c.ga.max_iterations = 4;
    run_pipeline(c, {"proposed"}, "run", true);
    CHECK(read_text(dir / "full" / "selected_features.json") == read_text(dir / "partial" / "selected_features.json"));
    CHECK(read_text(dir / "full" / "trajectory.csv") == read_text(dir / "partial" / "trajectory.csv"));
}

TEST_CASE("one-cell sweep matches the proposed run") {
    const fs::path dir = small_setup("pipeline_sweep");
    RunConfig c = load_run_config((dir / "config.json").string());
    c.output_dir = (dir / "run").string();
    run_pipeline(c, {"proposed"});
    SweepGrid grid;
    grid.points = {{c.ga.crossover_rate, c.ga.mutation_rate, c.ga.population_size, c.cost.hidden_dim}};
    c.output_dir = (dir / "sweep").string();
    const auto cells = sweep(c, grid);
    REQUIRE(cells.size() == 1);
    CHECK_FALSE(cells[0].error);
    CHECK(read_text(dir / "run" / "selected_features.json") ==
          read_text(dir / "sweep" / "cell_0" / "selected_features.json"));
    CHECK(read_text(dir / "run" / "metrics.json") == read_text(dir / "sweep" / "cell_0" / "metrics.json"));
    CHECK(fs::exists(dir / "sweep" / "sweep.csv"));
}

TEST_CASE("parallel sweep artifacts equal serial ones") {
    const fs::path dir = small_setup("pipeline_sweep_parallel");
    RunConfig c = load_run_config((dir / "config.json").string());
    SweepGrid grid;
    grid.theta = {0.6, 0.8};
    grid.mu = {0.3};
    grid.population = {6};
    grid.hidden = {2, 3};
    c.output_dir = (dir / "serial").string();
    sweep(c, grid);
    c.workers = 3;
    c.output_dir = (dir / "parallel").string();
    sweep(c, grid);
    check_identical_trees(dir / "serial", dir / "parallel");
}

TEST_CASE("parameter-study grid layout") {
    const auto points = expand_grid(parameter_study_grid());
    REQUIRE(points.size() == 18);
    CHECK(points[0].theta == 0.6);
    CHECK(points[0].mu == 0.2);
    CHECK(points[17].theta == 0.8);
    CHECK(points[17].mu == 0.3);
    CHECK(points[15].population == 650);
    CHECK(points[16].population == 700);
    CHECK(points[16].hidden == 15);
}

}
