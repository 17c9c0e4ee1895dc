#include "gafs/neuro.hpp"

#include <cmath>
#include <sstream>

namespace gafs {
namespace {

constexpr double kMaxDamping = 1e12;
constexpr double kMinDamping = 1e-15;

Matrix with_bias(const Matrix& rows) {
    Matrix out(rows.rows(), rows.cols() + 1);
    out.leftCols(rows.cols()) = rows;
    out.col(rows.cols()).setOnes();
    return out;
}

// Hidden activations (n x hidden) for inputs that already carry the bias column.
Matrix hidden_activations(const MlpModel& model, const Matrix& biased) {
    return (biased * model.w_hidden.transpose()).array().tanh().matrix();
}

Vector output_from_hidden(const MlpModel& model, const Matrix& hidden) {
    const auto h = static_cast<Eigen::Index>(model.hidden_dim);
    return (hidden * model.w_out.head(h)).array() + model.w_out(h);
}

Matrix jacobian_biased(const MlpModel& model, const Matrix& biased, const Matrix& hidden) {
    const auto n = biased.rows();
    const auto h = static_cast<Eigen::Index>(model.hidden_dim);
    const auto d1 = biased.cols();
    Matrix jac(n, static_cast<Eigen::Index>(model.weight_count()));
    // Local gradient of each hidden unit: w_out_j * (1 - a_j^2).
    const Matrix g = (1.0 - hidden.array().square()).matrix() * model.w_out.head(h).asDiagonal();
    for (Eigen::Index j = 0; j < h; ++j) {
        jac.middleCols(j * d1, d1) = g.col(j).asDiagonal() * biased;
    }
    jac.middleCols(h * d1, h) = hidden;
    jac.col(h * d1 + h).setOnes();
    return jac;
}

void check_dims(const MlpModel& model, Eigen::Index cols) {
    if (static_cast<std::size_t>(cols) != model.input_dim) {
        throw DataError("input dimension " + std::to_string(cols) + " does not match model input " +
                        std::to_string(model.input_dim));
    }
}

}  // namespace

Vector MlpModel::flatten() const {
    Vector w(static_cast<Eigen::Index>(weight_count()));
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < w_hidden.rows(); ++r) {
        for (Eigen::Index c = 0; c < w_hidden.cols(); ++c) {
            w(k++) = w_hidden(r, c);
        }
    }
    w.tail(w_out.size()) = w_out;
    return w;
}

void MlpModel::assign(const Vector& weights) {
    if (static_cast<std::size_t>(weights.size()) != weight_count()) {
        throw DataError("weight vector length does not match model");
    }
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < w_hidden.rows(); ++r) {
        for (Eigen::Index c = 0; c < w_hidden.cols(); ++c) {
            w_hidden(r, c) = weights(k++);
        }
    }
    w_out = weights.tail(w_out.size());
}

void to_json(nlohmann::json& j, const MlpModel& model) {
    const Vector w = model.flatten();
    j = nlohmann::json{{"input_dim", model.input_dim},
                       {"hidden_dim", model.hidden_dim},
                       {"hidden_activation", "tanh"},
                       {"output_activation", "identity"},
                       {"weights", std::vector<double>(w.data(), w.data() + w.size())}};
}

void from_json(const nlohmann::json& j, MlpModel& model) {
    model.input_dim = j.at("input_dim").get<std::size_t>();
    model.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    model.w_hidden.resize(static_cast<Eigen::Index>(model.hidden_dim), static_cast<Eigen::Index>(model.input_dim + 1));
    model.w_out.resize(static_cast<Eigen::Index>(model.hidden_dim + 1));
    const auto weights = j.at("weights").get<std::vector<double>>();
    model.assign(Eigen::Map<const Vector>(weights.data(), static_cast<Eigen::Index>(weights.size())));
}

void LmConfig::validate() const {
    if (!(initial_damping > 0.0) || !(damping_up > 1.0) || !(damping_down > 1.0) || !(convergence_tol > 0.0)) {
        throw ConfigError("LM damping must be positive, damping factors > 1, tolerance > 0");
    }
}

MlpModel init_mlp(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed) {
    if (input_dim == 0 || hidden_dim == 0) {
        throw ConfigError("MLP dimensions must be positive");
    }
    MlpModel model;
    model.input_dim = input_dim;
    model.hidden_dim = hidden_dim;
    model.w_hidden.resize(static_cast<Eigen::Index>(hidden_dim), static_cast<Eigen::Index>(input_dim + 1));
    model.w_out.resize(static_cast<Eigen::Index>(hidden_dim + 1));
    Rng rng(derive_seed(seed, 0x3117));
    const double hidden_limit = 1.0 / std::sqrt(static_cast<double>(input_dim));
    const double out_limit = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    for (Eigen::Index r = 0; r < model.w_hidden.rows(); ++r) {
        for (Eigen::Index c = 0; c < model.w_hidden.cols(); ++c) {
            model.w_hidden(r, c) = rng.uniform(-hidden_limit, hidden_limit);
        }
    }
    for (Eigen::Index k = 0; k < model.w_out.size(); ++k) {
        model.w_out(k) = rng.uniform(-out_limit, out_limit);
    }
    return model;
}

double forward(const MlpModel& model, const Vector& x) {
    check_dims(model, x.size());
    const auto d = static_cast<Eigen::Index>(model.input_dim);
    const auto h = static_cast<Eigen::Index>(model.hidden_dim);
    const Vector a = (model.w_hidden.leftCols(d) * x + model.w_hidden.col(d)).array().tanh();
    return model.w_out.head(h).dot(a) + model.w_out(h);
}

Vector predict(const MlpModel& model, const Matrix& rows) {
    check_dims(model, rows.cols());
    const Matrix biased = with_bias(rows);
    return output_from_hidden(model, hidden_activations(model, biased));
}

double mse(const Vector& predictions, const Vector& targets) {
    if (predictions.size() != targets.size()) {
        throw DataError("prediction and target lengths differ");
    }
    if (predictions.size() == 0) {
        throw DataError("mse of empty input");
    }
    return (predictions - targets).squaredNorm() / static_cast<double>(predictions.size());
}

Matrix jacobian(const MlpModel& model, const Matrix& batch) {
    check_dims(model, batch.cols());
    const Matrix biased = with_bias(batch);
    return jacobian_biased(model, biased, hidden_activations(model, biased));
}

LmResult train_lm(const MlpModel& model, const Matrix& rows, const Vector& targets, const LmConfig& config) {
    config.validate();
    check_dims(model, rows.cols());
    if (rows.rows() == 0 || rows.rows() != targets.size()) {
        throw DataError("training requires at least one row and one target per row");
    }
    const Matrix biased = with_bias(rows);
    const auto n = static_cast<double>(rows.rows());
    const auto w_count = static_cast<Eigen::Index>(model.weight_count());

    LmResult result;
    result.model = model;
    Matrix hidden = hidden_activations(result.model, biased);
    Vector residual = output_from_hidden(result.model, hidden) - targets;
    result.mse = residual.squaredNorm() / n;
    if (!std::isfinite(result.mse)) {
        throw NumericError("non-finite training loss before the first LM step");
    }
    result.history.push_back(result.mse);

    Vector weights = result.model.flatten();
    MlpModel trial = result.model;
    const auto system_size = std::min<Eigen::Index>(w_count, rows.rows());
    Matrix normal(system_size, system_size);
    Eigen::LLT<Matrix> llt;
    double damping = config.initial_damping;

    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        result.epochs = epoch + 1;
        const Matrix jac = jacobian_biased(result.model, biased, hidden);
        // With more weights than rows, (J'J + lI)^-1 J'r = J'(JJ' + lI)^-1 r
        // gives the same step from a smaller system.
        const bool dual = w_count > rows.rows();
        normal.setZero();
        if (dual) {
            normal.selfadjointView<Eigen::Lower>().rankUpdate(jac);
        } else {
            normal.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose());
        }
        const Vector gradient = dual ? Vector(residual) : Vector(jac.transpose() * residual);

        bool accepted = false;
        double trial_mse = 0.0;
        Matrix trial_hidden;
        Vector trial_residual;
        while (damping <= kMaxDamping) {
            Matrix damped = normal;
            damped.diagonal().array() += damping;
            llt.compute(damped);
            if (llt.info() == Eigen::Success) {
                const Vector step = dual ? Vector(jac.transpose() * llt.solve(gradient)) : Vector(llt.solve(gradient));
                trial.assign(weights - step);
                trial_hidden = hidden_activations(trial, biased);
                trial_residual = output_from_hidden(trial, trial_hidden) - targets;
                trial_mse = trial_residual.squaredNorm() / n;
                if (std::isfinite(trial_mse) && trial_mse < result.mse) {
                    accepted = true;
                    damping = std::max(damping / config.damping_down, kMinDamping);
                    break;
                }
            }
            damping *= config.damping_up;
        }
        if (!accepted) {
            break;  // no damping level improves the loss: local minimum
        }
        const double improvement = result.mse - trial_mse;
        weights = trial.flatten();
        result.model = trial;
        hidden = std::move(trial_hidden);
        residual = std::move(trial_residual);
        result.mse = trial_mse;
        result.history.push_back(trial_mse);
        if (improvement < config.convergence_tol) {
            break;
        }
    }
    return result;
}

void CostConfig::validate() const {
    if (!(omega >= 0.0)) {
        throw ConfigError("omega must be non-negative");
    }
    if (hidden_dim == 0) {
        throw ConfigError("hidden neuron count must be positive");
    }
    if (!(inner_train_fraction > 0.0 && inner_train_fraction < 1.0)) {
        throw ConfigError("inner_train_fraction must be in (0, 1)");
    }
    lm.validate();
}

double penalized_cost(double epsilon, double omega, std::size_t n_selected) {
    return epsilon * (1.0 + omega * static_cast<double>(n_selected));
}

CostValue evaluate_cost(const Dataset& dataset, const SelectionMask& mask, const CostConfig& config,
                        std::uint64_t inner_split_seed) {
    config.validate();
    if (mask.size() != dataset.features()) {
        throw DataError("mask length does not match dataset feature count");
    }
    CostValue value;
    value.n_selected = mask.count();
    if (value.n_selected == 0) {
        value.epsilon = config.worst_cost;
        value.j = config.worst_cost;
        return value;
    }
    const auto train_rows = split_train_indices(dataset.labels, {config.inner_train_fraction, true, inner_split_seed});
    const auto columns = mask.indices();
    const auto n_train = static_cast<Eigen::Index>(train_rows.size());
    const auto n_test = static_cast<Eigen::Index>(dataset.rows() - train_rows.size());
    const auto k = static_cast<Eigen::Index>(columns.size());
    Matrix x_train(n_train, k);
    Matrix x_test(n_test, k);
    Vector y_train(n_train);
    Vector y_test(n_test);
    std::size_t t = 0;
    Eigen::Index a = 0;
    Eigen::Index b = 0;
    for (std::size_t i = 0; i < dataset.rows(); ++i) {
        const bool is_train = t < train_rows.size() && train_rows[t] == i;
        const auto row = static_cast<Eigen::Index>(i);
        if (is_train) {
            ++t;
            for (Eigen::Index c = 0; c < k; ++c) {
                x_train(a, c) = dataset.x(row, static_cast<Eigen::Index>(columns[static_cast<std::size_t>(c)]));
            }
            y_train(a++) = dataset.labels[i];
        } else {
            for (Eigen::Index c = 0; c < k; ++c) {
                x_test(b, c) = dataset.x(row, static_cast<Eigen::Index>(columns[static_cast<std::size_t>(c)]));
            }
            y_test(b++) = dataset.labels[i];
        }
    }
    const std::uint64_t init_seed = derive_seed(inner_split_seed, SelectionMaskHash{}(mask), config.lm.seed);
    const auto model = init_mlp(static_cast<std::size_t>(k), config.hidden_dim, init_seed);
    const auto trained = train_lm(model, x_train, y_train, config.lm);
    value.epsilon = mse(predict(trained.model, x_test), y_test);
    value.j = penalized_cost(value.epsilon, config.omega, value.n_selected);
    return value;
}

}  // namespace gafs
