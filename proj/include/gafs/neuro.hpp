#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "gafs/common.hpp"
#include "gafs/dataset.hpp"

namespace gafs {

/// Single-hidden-layer perceptron with tanh hidden units and a linear output.
/// Bias weights sit in the last column of `w_hidden` and the last entry of
/// `w_out`.
struct MlpModel {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    Matrix w_hidden;  // hidden_dim x (input_dim + 1)
    Vector w_out;     // hidden_dim + 1

    std::size_t weight_count() const { return hidden_dim * (input_dim + 1) + hidden_dim + 1; }
    /// Hidden weights row-major, then output weights.
    Vector flatten() const;
    void assign(const Vector& weights);
};

void to_json(nlohmann::json& j, const MlpModel& model);
void from_json(const nlohmann::json& j, MlpModel& model);

struct LmConfig {
    double initial_damping = 1e-2;
    double damping_up = 10.0;
    double damping_down = 10.0;
    std::size_t max_epochs = 100;
    double convergence_tol = 1e-6;
    std::uint64_t seed = 0;

    void validate() const;
};

struct LmResult {
    MlpModel model;
    double mse = 0.0;
    std::size_t epochs = 0;
    /// Training MSE before training and after every accepted step.
    std::vector<double> history;
};

MlpModel init_mlp(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed);

double forward(const MlpModel& model, const Vector& x);
Vector predict(const MlpModel& model, const Matrix& rows);

double mse(const Vector& predictions, const Vector& targets);

/// d(prediction_i)/d(weight_k), weights ordered as in MlpModel::flatten.
Matrix jacobian(const MlpModel& model, const Matrix& batch);

LmResult train_lm(const MlpModel& model, const Matrix& rows, const Vector& targets, const LmConfig& config);

/// Parameters of the penalized wrapper cost J = eps * (1 + omega * |selected|).
struct CostConfig {
    double omega = 0.01;
    std::size_t hidden_dim = 15;
    LmConfig lm;
    double inner_train_fraction = 0.7;
    /// Returned for an empty selection so the search can continue.
    double worst_cost = 1e6;

    void validate() const;
};

struct CostValue {
    double epsilon = 0.0;
    double j = 0.0;
    std::size_t n_selected = 0;
};

double penalized_cost(double epsilon, double omega, std::size_t n_selected);

/// Trains an MLP on a stratified share of the projected dataset (labels as
/// regression targets) and returns the held-out MSE with the size penalty.
/// Weight initialization is seeded from (inner_split_seed, mask), so the
/// result is a pure function of its arguments.
CostValue evaluate_cost(const Dataset& dataset, const SelectionMask& mask, const CostConfig& config,
                        std::uint64_t inner_split_seed);

}  // namespace gafs
