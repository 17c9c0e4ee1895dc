#include "gafs/ga_selector.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace gafs {
namespace {

constexpr double kBetaUpper = 1e6;

std::vector<double> costs_of(const Population& population) {
    std::vector<double> costs;
    costs.reserve(population.size());
    for (const auto& ind : population) {
        costs.push_back(ind.cost->j);
    }
    return costs;
}

std::vector<double> boltzmann_weights(const std::vector<double>& costs, double beta, double scale) {
    const double best = *std::min_element(costs.begin(), costs.end());
    std::vector<double> w(costs.size());
    for (std::size_t i = 0; i < costs.size(); ++i) {
        // Shifting by the best cost cancels in the normalization.
        w[i] = std::exp(-beta * (costs[i] - best) / scale);
    }
    return w;
}

double scale_for(const std::vector<double>& costs, BoltzmannForm form) {
    if (form == BoltzmannForm::raw) {
        return 1.0;
    }
    const double largest = *std::max_element(costs.begin(), costs.end());
    return largest > 0.0 ? largest : 1.0;
}

// Evaluates every unevaluated individual; returns the number of cost calls.
std::size_t evaluate_all(Population& individuals, const CostFunction& cost_fn, std::size_t workers,
                         std::unordered_map<SelectionMask, CostValue, SelectionMaskHash>* cache) {
    std::vector<std::size_t> pending;
    std::vector<std::size_t> duplicate_of(individuals.size(), individuals.size());
    std::unordered_map<SelectionMask, std::size_t, SelectionMaskHash> first_seen;
    for (std::size_t i = 0; i < individuals.size(); ++i) {
        auto& ind = individuals[i];
        if (ind.cost) {
            continue;
        }
        if (cache) {
            if (auto it = cache->find(ind.position); it != cache->end()) {
                ind.cost = it->second;
                continue;
            }
            auto [it, inserted] = first_seen.emplace(ind.position, i);
            if (!inserted) {
                duplicate_of[i] = it->second;
                continue;
            }
        }
        pending.push_back(i);
    }
    std::vector<CostValue> results(pending.size());
    parallel_for(pending.size(), workers, [&](std::size_t k) {
        results[k] = cost_fn(individuals[pending[k]].position);
    });
    for (std::size_t k = 0; k < pending.size(); ++k) {
        individuals[pending[k]].cost = results[k];
        if (cache) {
            cache->emplace(individuals[pending[k]].position, results[k]);
        }
    }
    for (std::size_t i = 0; i < individuals.size(); ++i) {
        if (duplicate_of[i] < individuals.size()) {
            individuals[i].cost = individuals[duplicate_of[i]].cost;
        }
    }
    return pending.size();
}

GenerationRecord record_for(const Population& population, std::size_t iteration, std::size_t nfe, double beta) {
    GenerationRecord rec;
    rec.iteration = iteration;
    rec.best_cost = population.front().cost->j;
    rec.best_selected = population.front().position.count();
    rec.nfe = nfe;
    rec.beta = beta;
    return rec;
}

}  // namespace

std::string to_string(CrossoverMethod method) {
    switch (method) {
        case CrossoverMethod::single_point: return "single";
        case CrossoverMethod::double_point: return "double";
        case CrossoverMethod::uniform: return "uniform";
    }
    return "unknown";
}

void GaConfig::validate() const {
    if (population_size < 4 || population_size % 2 != 0) {
        throw ConfigError("population size must be even and at least 4");
    }
    if (!(crossover_rate > 0.0 && crossover_rate < 1.0)) {
        throw ConfigError("crossover rate must be in (0, 1)");
    }
    if (!(mutation_rate > 0.0 && mutation_rate < 1.0)) {
        throw ConfigError("mutation rate must be in (0, 1)");
    }
    if (gene_flip_prob && !(*gene_flip_prob > 0.0 && *gene_flip_prob < 1.0)) {
        throw ConfigError("gene flip probability must be in (0, 1)");
    }
    double total = 0.0;
    for (double p : crossover_method_probs) {
        if (!(p >= 0.0)) {
            throw ConfigError("crossover method probabilities must be non-negative");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("crossover method probabilities must sum to 1");
    }
    if (!(target_top_half_mass > 0.5 && target_top_half_mass < 1.0)) {
        throw ConfigError("target top-half mass must be in (0.5, 1)");
    }
}

double GaConfig::flip_prob(std::size_t m) const {
    if (gene_flip_prob) {
        return *gene_flip_prob;
    }
    return std::max(1.0 / static_cast<double>(m), 0.01);
}

std::size_t GaConfig::crossover_pairs() const {
    return static_cast<std::size_t>(std::lround(crossover_rate * static_cast<double>(population_size) / 2.0));
}

std::size_t GaConfig::mutant_count() const {
    return static_cast<std::size_t>(std::lround(mutation_rate * static_cast<double>(population_size)));
}

void to_json(nlohmann::json& j, const GaConfig& config) {
    j = nlohmann::json{{"population_size", config.population_size},
                       {"max_iterations", config.max_iterations},
                       {"crossover_rate", config.crossover_rate},
                       {"mutation_rate", config.mutation_rate},
                       {"crossover_method_probs", config.crossover_method_probs},
                       {"target_top_half_mass", config.target_top_half_mass},
                       {"boltzmann_form", config.boltzmann_form == BoltzmannForm::raw ? "raw" : "normalized"},
                       {"seed", config.seed},
                       {"cache_costs", config.cache_costs}};
    j["gene_flip_prob"] = config.gene_flip_prob ? nlohmann::json(*config.gene_flip_prob) : nlohmann::json(nullptr);
    j["nfe_budget"] = config.nfe_budget ? nlohmann::json(*config.nfe_budget) : nlohmann::json(nullptr);
}

double top_half_mass(const std::vector<double>& sorted_costs, double beta, BoltzmannForm form) {
    const auto w = boltzmann_weights(sorted_costs, beta, scale_for(sorted_costs, form));
    const std::size_t half = sorted_costs.size() / 2;
    double top = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        total += w[i];
        if (i < half) {
            top += w[i];
        }
    }
    return top / total;
}

BetaCalibration calibrate_beta(const std::vector<double>& sorted_costs, double target_mass, BoltzmannForm form) {
    if (sorted_costs.size() < 2) {
        throw ConfigError("beta calibration needs at least two costs");
    }
    if (!(target_mass > 0.5 && target_mass < 1.0)) {
        throw ConfigError("target mass must be in (0.5, 1)");
    }
    for (std::size_t i = 0; i < sorted_costs.size(); ++i) {
        if (!std::isfinite(sorted_costs[i])) {
            throw NumericError("non-finite cost in beta calibration");
        }
        if (i > 0 && sorted_costs[i] < sorted_costs[i - 1]) {
            throw ConfigError("costs must be sorted ascending for beta calibration");
        }
    }
    BetaCalibration out;
    if (sorted_costs.front() == sorted_costs.back()) {
        out.degenerate = true;
        return out;
    }
    if (top_half_mass(sorted_costs, 0.0, form) >= target_mass) {
        return out;
    }
    if (top_half_mass(sorted_costs, kBetaUpper, form) < target_mass) {
        out.beta = kBetaUpper;
        out.saturated = true;
        return out;
    }
    double lo = 0.0;
    double hi = kBetaUpper;
    for (int i = 0; i < 400; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        if (top_half_mass(sorted_costs, mid, form) < target_mass) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    out.beta = 0.5 * (lo + hi);
    return out;
}

std::vector<double> boltzmann_probabilities(const std::vector<double>& costs, double beta, double largest_cost) {
    if (costs.empty()) {
        throw ConfigError("no costs to weight");
    }
    for (double c : costs) {
        if (!std::isfinite(c)) {
            throw NumericError("non-finite cost in Boltzmann probabilities");
        }
    }
    if (!(largest_cost > 0.0)) {
        return std::vector<double>(costs.size(), 1.0 / static_cast<double>(costs.size()));
    }
    auto w = boltzmann_weights(costs, beta, largest_cost);
    double total = 0.0;
    for (double x : w) {
        total += x;
    }
    for (auto& x : w) {
        x /= total;
    }
    return w;
}

std::size_t roulette_index(const std::vector<double>& probabilities, double u) {
    double cumulative = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        cumulative += probabilities[i];
        if (cumulative >= u && probabilities[i] > 0.0) {
            return i;
        }
    }
    // Rounding left the total just below u: take the last non-zero slot.
    for (std::size_t i = probabilities.size(); i-- > 0;) {
        if (probabilities[i] > 0.0) {
            return i;
        }
    }
    return 0;
}

std::size_t roulette_select(const std::vector<double>& probabilities, Rng& rng) {
    return roulette_index(probabilities, rng.uniform());
}

CrossoverMethod pick_crossover_method(const std::array<double, 3>& probs, Rng& rng) {
    const std::vector<double> p(probs.begin(), probs.end());
    switch (roulette_index(p, rng.uniform())) {
        case 0: return CrossoverMethod::single_point;
        case 1: return CrossoverMethod::double_point;
        default: return CrossoverMethod::uniform;
    }
}

Offspring single_point_crossover(const SelectionMask& p1, const SelectionMask& p2, std::size_t cut) {
    if (p1.size() != p2.size() || p1.size() < 2) {
        throw ConfigError("crossover needs equal-length parents with at least two genes");
    }
    if (cut < 1 || cut > p1.size() - 1) {
        throw ConfigError("single-point cut out of range");
    }
    Offspring out{p1, p2};
    for (std::size_t i = cut; i < p1.size(); ++i) {
        out.first.set(i, p2.test(i));
        out.second.set(i, p1.test(i));
    }
    return out;
}

Offspring double_point_crossover(const SelectionMask& p1, const SelectionMask& p2, std::size_t first,
                                 std::size_t second) {
    if (p1.size() != p2.size() || p1.size() < 2) {
        throw ConfigError("crossover needs equal-length parents with at least two genes");
    }
    if (first < 1 || first >= second || second > p1.size() - 1) {
        throw ConfigError("double-point cuts out of range");
    }
    Offspring out{p1, p2};
    for (std::size_t i = first; i < second; ++i) {
        out.first.set(i, p2.test(i));
        out.second.set(i, p1.test(i));
    }
    return out;
}

Offspring uniform_crossover(const SelectionMask& p1, const SelectionMask& p2, const SelectionMask& swap_mask) {
    if (p1.size() != p2.size() || swap_mask.size() != p1.size() || p1.size() < 2) {
        throw ConfigError("crossover needs equal-length parents and mask with at least two genes");
    }
    Offspring out{p1, p2};
    for (std::size_t i = 0; i < p1.size(); ++i) {
        if (swap_mask.test(i)) {
            out.first.set(i, p2.test(i));
            out.second.set(i, p1.test(i));
        }
    }
    return out;
}

Offspring crossover(const SelectionMask& p1, const SelectionMask& p2, CrossoverMethod method, Rng& rng) {
    const std::size_t m = p1.size();
    if (m < 2 || p2.size() != m) {
        throw ConfigError("crossover needs equal-length parents with at least two genes");
    }
    // Only one cut position exists for m = 2, so double-point degrades to single.
    if (method == CrossoverMethod::double_point && m >= 3) {
        std::size_t a = 1 + rng.index(m - 1);
        std::size_t b = 1 + rng.index(m - 2);
        if (b >= a) {
            ++b;
        }
        return double_point_crossover(p1, p2, std::min(a, b), std::max(a, b));
    }
    if (method == CrossoverMethod::uniform) {
        SelectionMask xi(m);
        for (std::size_t i = 0; i < m; ++i) {
            xi.set(i, rng.bernoulli(0.5));
        }
        return uniform_crossover(p1, p2, xi);
    }
    return single_point_crossover(p1, p2, 1 + rng.index(m - 1));
}

SelectionMask mutate(const SelectionMask& position, double flip_prob, Rng& rng) {
    SelectionMask out = position;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (rng.bernoulli(flip_prob)) {
            out.flip(i);
        }
    }
    if (out.size() > 0 && out.none()) {
        out.set(rng.index(out.size()));
    }
    return out;
}

void sort_population(Population& population) {
    std::stable_sort(population.begin(), population.end(), [](const Individual& a, const Individual& b) {
        if (a.cost->j != b.cost->j) {
            return a.cost->j < b.cost->j;
        }
        return a.cost->n_selected < b.cost->n_selected;
    });
}

Population init_population(std::size_t population_size, std::size_t m, Rng& rng, const CostFunction& cost_fn,
                           std::size_t workers) {
    if (population_size < 4 || m < 2) {
        throw ConfigError("initial population needs at least 4 individuals and 2 genes");
    }
    // Duplicates are redrawn whenever there are enough non-empty masks.
    const bool distinct = m >= 63 || population_size <= (std::uint64_t{1} << m) - 1;
    std::unordered_set<SelectionMask, SelectionMaskHash> seen;
    Population population(population_size);
    for (auto& ind : population) {
        ind.position = SelectionMask(m);
        do {
            for (std::size_t i = 0; i < m; ++i) {
                ind.position.set(i, rng.bernoulli(0.5));
            }
        } while (ind.position.none() || (distinct && seen.contains(ind.position)));
        seen.insert(ind.position);
    }
    evaluate_all(population, cost_fn, workers, nullptr);
    sort_population(population);
    return population;
}

std::vector<double> GaResult::best_cost_trajectory() const {
    std::vector<double> out;
    out.reserve(trajectory.size());
    for (const auto& r : trajectory) {
        out.push_back(r.best_cost);
    }
    return out;
}

void to_json(nlohmann::json& j, const GaCheckpoint& checkpoint) {
    nlohmann::json pop = nlohmann::json::array();
    for (const auto& ind : checkpoint.population) {
        pop.push_back({{"position", ind.position.to_string()},
                       {"epsilon", ind.cost->epsilon},
                       {"j", ind.cost->j},
                       {"n_selected", ind.cost->n_selected}});
    }
    nlohmann::json traj = nlohmann::json::array();
    for (const auto& r : checkpoint.trajectory) {
        traj.push_back({{"iteration", r.iteration},
                        {"best_cost", r.best_cost},
                        {"nfe", r.nfe},
                        {"beta", r.beta},
                        {"best_selected", r.best_selected}});
    }
    j = nlohmann::json{{"iteration", checkpoint.iteration},
                       {"nfe_used", checkpoint.nfe_used},
                       {"population", pop},
                       {"trajectory", traj},
                       {"rng_state", checkpoint.rng_state}};
}

void from_json(const nlohmann::json& j, GaCheckpoint& checkpoint) {
    checkpoint.iteration = j.at("iteration").get<std::size_t>();
    checkpoint.nfe_used = j.at("nfe_used").get<std::size_t>();
    checkpoint.rng_state = j.at("rng_state").get<std::string>();
    checkpoint.population.clear();
    for (const auto& p : j.at("population")) {
        Individual ind;
        ind.position = SelectionMask::from_string(p.at("position").get<std::string>());
        ind.cost = CostValue{p.at("epsilon").get<double>(), p.at("j").get<double>(),
                             p.at("n_selected").get<std::size_t>()};
        checkpoint.population.push_back(std::move(ind));
    }
    checkpoint.trajectory.clear();
    for (const auto& r : j.at("trajectory")) {
        checkpoint.trajectory.push_back({r.at("iteration").get<std::size_t>(), r.at("best_cost").get<double>(),
                                         r.at("nfe").get<std::size_t>(), r.at("beta").get<double>(),
                                         r.at("best_selected").get<std::size_t>()});
    }
}

GaResult run_ga(std::size_t m, const GaConfig& config, const CostFunction& cost_fn, const GaHooks& hooks) {
    config.validate();
    if (m < 2) {
        throw ConfigError("the GA needs at least two features");
    }
    std::unordered_map<SelectionMask, CostValue, SelectionMaskHash> cache;
    auto* cache_ptr = config.cache_costs ? &cache : nullptr;

    Rng rng(config.seed);
    GaResult result;
    result.seed = config.seed;
    Population population;
    std::size_t start = 0;
    if (hooks.resume) {
        const auto& cp = *hooks.resume;
        population = cp.population;
        if (population.size() != config.population_size || population.front().position.size() != m) {
            throw ConfigError("checkpoint does not match the GA configuration");
        }
        result.trajectory = cp.trajectory;
        result.nfe_used = cp.nfe_used;
        start = cp.iteration;
        std::istringstream in(cp.rng_state);
        in >> rng.engine();
        if (!in) {
            throw ConfigError("checkpoint RNG state is malformed");
        }
    } else {
        population = init_population(config.population_size, m, rng, cost_fn, config.workers);
        result.nfe_used = config.population_size;
        result.trajectory.push_back(record_for(population, 0, result.nfe_used, 0.0));
        if (hooks.on_generation) {
            hooks.on_generation(result.trajectory.back());
        }
    }
    if (cache_ptr) {
        for (const auto& ind : population) {
            cache.emplace(ind.position, *ind.cost);
        }
    }

    const std::size_t pairs = config.crossover_pairs();
    const std::size_t mutants = config.mutant_count();
    const double flip = config.flip_prob(m);

    for (std::size_t iteration = start + 1; iteration <= config.max_iterations; ++iteration) {
        if (config.nfe_budget && result.nfe_used + 2 * pairs + mutants > *config.nfe_budget) {
            break;
        }
        const auto costs = costs_of(population);
        const auto calibration = calibrate_beta(costs, config.target_top_half_mass, config.boltzmann_form);
        const double largest = config.boltzmann_form == BoltzmannForm::raw ? 1.0 : costs.back();
        const auto probs = boltzmann_probabilities(costs, calibration.beta, largest);

        Population children;
        children.reserve(2 * pairs + mutants);
        for (std::size_t c = 0; c < pairs; ++c) {
            const auto& p1 = population[roulette_select(probs, rng)];
            const auto& p2 = population[roulette_select(probs, rng)];
            const auto method = pick_crossover_method(config.crossover_method_probs, rng);
            auto [o1, o2] = crossover(p1.position, p2.position, method, rng);
            children.push_back({std::move(o1), std::nullopt});
            children.push_back({std::move(o2), std::nullopt});
        }
        for (std::size_t k = 0; k < mutants; ++k) {
            const auto& parent = population[roulette_select(probs, rng)];
            children.push_back({mutate(parent.position, flip, rng), std::nullopt});
        }
        try {
            result.nfe_used += evaluate_all(children, cost_fn, config.workers, cache_ptr);
        } catch (const std::exception& e) {
            throw NumericError("cost evaluation failed in generation " + std::to_string(iteration) + ": " + e.what());
        }

        population.insert(population.end(), std::make_move_iterator(children.begin()),
                          std::make_move_iterator(children.end()));
        sort_population(population);
        population.resize(config.population_size);
        result.trajectory.push_back(record_for(population, iteration, result.nfe_used, calibration.beta));
        if (hooks.on_generation) {
            hooks.on_generation(result.trajectory.back());
        }
        if (hooks.on_checkpoint && hooks.checkpoint_every > 0 && iteration % hooks.checkpoint_every == 0) {
            GaCheckpoint cp;
            cp.iteration = iteration;
            cp.nfe_used = result.nfe_used;
            cp.population = population;
            cp.trajectory = result.trajectory;
            std::ostringstream out;
            out << rng.engine();
            cp.rng_state = out.str();
            hooks.on_checkpoint(cp);
        }
    }

    result.best_mask = population.front().position;
    result.best_cost = *population.front().cost;
    result.final_population = std::move(population);
    return result;
}

CostFunction make_neural_cost(const Dataset& dataset, const CostConfig& config, std::uint64_t seed) {
    config.validate();
    auto shared = std::make_shared<const Dataset>(dataset);
    return [shared, config, seed](const SelectionMask& mask) { return evaluate_cost(*shared, mask, config, seed); };
}

}  // namespace gafs
