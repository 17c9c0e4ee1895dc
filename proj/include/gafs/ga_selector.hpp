#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gafs/common.hpp"
#include "gafs/neuro.hpp"

namespace gafs {

struct Individual {
    SelectionMask position;
    std::optional<CostValue> cost;
};

using Population = std::vector<Individual>;

/// Maps a chromosome to its cost. Must be a pure function of the mask so
/// that parallel and serial evaluation agree.
using CostFunction = std::function<CostValue(const SelectionMask&)>;

enum class CrossoverMethod { single_point, double_point, uniform };

std::string to_string(CrossoverMethod method);

/// How Boltzmann weights scale costs: divided by the largest cost in the
/// population (default), or used raw.
enum class BoltzmannForm { normalized, raw };

struct GaConfig {
    std::size_t population_size = 700;
    std::size_t max_iterations = 100;
    double crossover_rate = 0.8;
    /// Fraction of the population spawned as mutants each generation.
    double mutation_rate = 0.3;
    /// Per-gene flip probability; unset means max(1/m, 0.01).
    std::optional<double> gene_flip_prob;
    /// Probabilities of single-point, double-point and uniform crossover.
    std::array<double, 3> crossover_method_probs{0.4, 0.3, 0.3};
    double target_top_half_mass = 0.7;
    BoltzmannForm boltzmann_form = BoltzmannForm::normalized;
    std::optional<std::size_t> nfe_budget;
    std::uint64_t seed = 0;
    /// Reuse costs of masks already evaluated in this run.
    bool cache_costs = false;
    std::size_t workers = 1;

    void validate() const;
    double flip_prob(std::size_t m) const;
    std::size_t crossover_pairs() const;
    std::size_t mutant_count() const;
};

void to_json(nlohmann::json& j, const GaConfig& config);

struct BetaCalibration {
    double beta = 0.0;
    /// All costs equal: selection is uniform whatever beta is.
    bool degenerate = false;
    /// The target mass cannot be reached inside the search bracket.
    bool saturated = false;
};

struct SelectionState {
    double beta = 0.0;
    std::vector<double> probabilities;
    double largest_cost = 0.0;
};

/// Boltzmann mass of the best half of `sorted_costs` at pressure beta.
double top_half_mass(const std::vector<double>& sorted_costs, double beta, BoltzmannForm form);

/// Finds beta in [0, 1e6] by bisection so that the best half of the sorted
/// population holds `target_mass` of the selection probability.
BetaCalibration calibrate_beta(const std::vector<double>& sorted_costs, double target_mass,
                               BoltzmannForm form = BoltzmannForm::normalized);

/// p_i proportional to exp(-beta * J_i / largest_cost). Uniform when every
/// cost is zero.
std::vector<double> boltzmann_probabilities(const std::vector<double>& costs, double beta, double largest_cost);

/// First index whose cumulative probability is >= u.
std::size_t roulette_index(const std::vector<double>& probabilities, double u);
std::size_t roulette_select(const std::vector<double>& probabilities, Rng& rng);

CrossoverMethod pick_crossover_method(const std::array<double, 3>& probs, Rng& rng);

using Offspring = std::pair<SelectionMask, SelectionMask>;

/// Tails from position `cut` (1 <= cut <= m-1) are exchanged.
Offspring single_point_crossover(const SelectionMask& p1, const SelectionMask& p2, std::size_t cut);
/// Segment [first, second) is exchanged, 1 <= first < second <= m-1.
Offspring double_point_crossover(const SelectionMask& p1, const SelectionMask& p2, std::size_t first,
                                 std::size_t second);
/// Gene i is exchanged where swap_mask has a 1.
Offspring uniform_crossover(const SelectionMask& p1, const SelectionMask& p2, const SelectionMask& swap_mask);

Offspring crossover(const SelectionMask& p1, const SelectionMask& p2, CrossoverMethod method, Rng& rng);

/// Independent per-gene flips; an all-zero result gets one random gene set.
SelectionMask mutate(const SelectionMask& position, double flip_prob, Rng& rng);

/// Sorts ascending by cost, then fewer selected features, then insertion order.
void sort_population(Population& population);

Population init_population(std::size_t population_size, std::size_t m, Rng& rng, const CostFunction& cost_fn,
                           std::size_t workers = 1);

struct GenerationRecord {
    std::size_t iteration = 0;
    double best_cost = 0.0;
    std::size_t nfe = 0;
    double beta = 0.0;
    std::size_t best_selected = 0;
};

struct GaResult {
    SelectionMask best_mask;
    CostValue best_cost;
    /// Best cost after initialization (iteration 0) and after every generation.
    std::vector<GenerationRecord> trajectory;
    std::size_t nfe_used = 0;
    std::uint64_t seed = 0;
    Population final_population;

    std::vector<double> best_cost_trajectory() const;
};

/// Serializable search state, written between generations.
struct GaCheckpoint {
    std::size_t iteration = 0;
    std::size_t nfe_used = 0;
    Population population;
    std::vector<GenerationRecord> trajectory;
    std::string rng_state;
};

void to_json(nlohmann::json& j, const GaCheckpoint& checkpoint);
void from_json(const nlohmann::json& j, GaCheckpoint& checkpoint);

struct GaHooks {
    /// Called after every generation (and after initialization).
    std::function<void(const GenerationRecord&)> on_generation;
    /// Called every `checkpoint_every` generations when set.
    std::function<void(const GaCheckpoint&)> on_checkpoint;
    std::size_t checkpoint_every = 0;
    /// Resume from this state instead of initializing.
    std::optional<GaCheckpoint> resume;
};

/// Binary GA: Boltzmann roulette parent selection with calibrated pressure,
/// crossover and mutation, then merge, sort and truncate to the population
/// size each generation.
GaResult run_ga(std::size_t m, const GaConfig& config, const CostFunction& cost_fn, const GaHooks& hooks = {});

/// Wrapper cost backed by evaluate_cost on a fixed dataset.
CostFunction make_neural_cost(const Dataset& dataset, const CostConfig& config, std::uint64_t seed);

}  // namespace gafs
