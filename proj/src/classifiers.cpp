#include "gafs/classifiers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

namespace gafs {
namespace {

constexpr double kTau = 1e-12;

double sigmoid(double z) {
    if (z >= 0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void require_two_classes(const Dataset& dataset) {
    dataset.validate();
    if (dataset.count_label(kSuccess) == 0 || dataset.count_label(kFailure) == 0) {
        throw DataError("training set contains a single class");
    }
}

nlohmann::json matrix_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        rows.push_back(std::move(row));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    Matrix m(rows, cols);
    const auto& data = j.at("data");
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = data.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
        }
    }
    return m;
}

nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const nlohmann::json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

// ---------------------------------------------------------------- lda

TrainedClassifier train_lda(const Dataset& d) {
    const auto m = static_cast<Eigen::Index>(d.features());
    TrainedClassifier model;
    model.kind = ClassifierKind::lda;
    model.dim = d.features();
    model.class_means = Matrix::Zero(2, m);
    std::array<double, 2> counts{0.0, 0.0};
    for (std::size_t i = 0; i < d.rows(); ++i) {
        model.class_means.row(d.labels[i]) += d.x.row(static_cast<Eigen::Index>(i));
        counts[static_cast<std::size_t>(d.labels[i])] += 1.0;
    }
    for (int c = 0; c < 2; ++c) {
        model.class_means.row(c) /= counts[static_cast<std::size_t>(c)];
    }
    Matrix centered = d.x;
    for (std::size_t i = 0; i < d.rows(); ++i) {
        centered.row(static_cast<Eigen::Index>(i)) -= model.class_means.row(d.labels[i]);
    }
    const double dof = std::max(1.0, static_cast<double>(d.rows()) - 2.0);
    Matrix cov = (centered.transpose() * centered) / dof;

    Eigen::LLT<Matrix> llt(cov);
    const bool singular = llt.info() != Eigen::Success || llt.rcond() < 1e-12;
    if (singular) {
        double scale = cov.trace() / static_cast<double>(m);
        if (!(scale > 0)) {
            scale = 1.0;
        }
        cov.diagonal().array() += 1e-6 * scale;
        llt.compute(cov);
        if (llt.info() != Eigen::Success) {
            throw NumericError("pooled covariance is not positive definite after regularization");
        }
    }
    model.covariance_inverse = llt.solve(Matrix::Identity(m, m));
    const double n = static_cast<double>(d.rows());
    model.priors = {counts[0] / n, counts[1] / n};
    return model;
}

double lda_score(const TrainedClassifier& model, const Eigen::Ref<const Vector>& x) {
    std::array<double, 2> delta{};
    for (int c = 0; c < 2; ++c) {
        const Vector mu = model.class_means.row(c).transpose();
        const Vector s_mu = model.covariance_inverse * mu;
        delta[static_cast<std::size_t>(c)] =
            x.dot(s_mu) - 0.5 * mu.dot(s_mu) + std::log(model.priors[static_cast<std::size_t>(c)]);
    }
    return sigmoid(delta[1] - delta[0]);
}

// ---------------------------------------------------------------- logistic

double logistic_objective(const Matrix& x, const Vector& y, const Vector& w, double b, double l2) {
    const Vector z = (x * w).array() + b;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        loss += softplus(z(i)) - y(i) * z(i);
    }
    return loss / static_cast<double>(z.size()) + 0.5 * l2 * w.squaredNorm();
}

TrainedClassifier train_logistic(const Dataset& d, const TrainConfig& config) {
    const auto n = static_cast<Eigen::Index>(d.rows());
    const auto m = static_cast<Eigen::Index>(d.features());
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i) = d.labels[static_cast<std::size_t>(i)];
    }
    Matrix xb(n, m + 1);
    xb.leftCols(m) = d.x;
    xb.col(m).setOnes();

    Vector theta = Vector::Zero(m + 1);
    const double l2 = config.logistic_l2;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int iter = 0; iter < 500; ++iter) {
        const Vector z = xb * theta;
        Vector p(n), s(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            p(i) = sigmoid(z(i));
            s(i) = p(i) * (1.0 - p(i));
        }
        Vector grad = inv_n * xb.transpose() * (p - y);
        grad.head(m) += l2 * theta.head(m);
        if (grad.norm() < 1e-8) {
            break;
        }
        Matrix hess = inv_n * xb.transpose() * s.asDiagonal() * xb;
        hess.diagonal().head(m).array() += l2;
        hess(m, m) += kTau;
        const Vector step = hess.ldlt().solve(grad);

        // Backtracking on the Newton direction.
        const double f0 = logistic_objective(d.x, y, theta.head(m), theta(m), l2);
        const double slope = grad.dot(step);
        double t = 1.0;
        Vector next = theta - step;
        while (t > 1e-10) {
            next = theta - t * step;
            if (logistic_objective(d.x, y, next.head(m), next(m), l2) <= f0 - 1e-4 * t * slope) {
                break;
            }
            t *= 0.5;
        }
        if (t <= 1e-10) {
            break;
        }
        theta = next;
    }

    TrainedClassifier model;
    model.kind = ClassifierKind::logistic;
    model.dim = d.features();
    model.weights = theta.head(m);
    model.intercept = theta(m);
    return model;
}

// ---------------------------------------------------------------- knn

double knn_score(const TrainedClassifier& model, const Eigen::Ref<const Vector>& x) {
    const auto n = model.train_x.rows();
    std::vector<std::pair<double, int>> dist(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        dist[static_cast<std::size_t>(i)] = {(model.train_x.row(i).transpose() - x).squaredNorm(),
                                             model.train_y[static_cast<std::size_t>(i)]};
    }
    const std::size_t k = std::min(model.k, dist.size());
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
    const double kth = dist[k - 1].first;
    std::vector<std::pair<double, int>> near;
    for (const auto& e : dist) {
        if (e.first <= kth) {
            near.push_back(e);
        }
    }
    // Sorting makes the sums independent of the stored row order.
    std::sort(near.begin(), near.end());

    if (model.uniform) {
        double hits = 0.0;
        for (const auto& e : near) {
            hits += e.second == kSuccess ? 1.0 : 0.0;
        }
        return hits / static_cast<double>(near.size());
    }
    if (near.front().first == 0.0) {
        double hits = 0.0, total = 0.0;
        for (const auto& e : near) {
            if (e.first == 0.0) {
                total += 1.0;
                hits += e.second == kSuccess ? 1.0 : 0.0;
            }
        }
        return hits / total;
    }
    double hits = 0.0, total = 0.0;
    for (const auto& e : near) {
        const double w = 1.0 / std::sqrt(e.first);
        total += w;
        hits += e.second == kSuccess ? w : 0.0;
    }
    return hits / total;
}

// ---------------------------------------------------------------- svm

Matrix rbf_kernel(const Matrix& a, const Matrix& b, double gamma) {
    const Vector na = a.rowwise().squaredNorm();
    const Vector nb = b.rowwise().squaredNorm();
    Matrix k = -2.0 * a * b.transpose();
    k.colwise() += na;
    k.rowwise() += nb.transpose();
    return (-gamma * k.array().max(0.0)).exp().matrix();
}

TrainedClassifier train_svm(const Dataset& d, const TrainConfig& config) {
    TrainedClassifier model;
    model.kind = ClassifierKind::svm_rbf;
    model.dim = d.features();
    switch (config.svm_gamma_rule) {
        case GammaRule::fixed:
            model.gamma = config.svm_gamma;
            break;
        case GammaRule::median_heuristic:
            model.gamma = rbf_median_gamma(d.x, config.seed);
            break;
        case GammaRule::inverse_features:
            model.gamma = 1.0 / static_cast<double>(d.features());
            break;
    }
    std::vector<int> signs(d.rows());
    for (std::size_t i = 0; i < d.rows(); ++i) {
        signs[i] = d.labels[i] == kSuccess ? 1 : -1;
    }
    const Matrix kernel = rbf_kernel(d.x, d.x, model.gamma);
    const SmoResult smo = smo_solve(kernel, signs, config.svm_c, config.svm_tol, config.svm_max_iterations);

    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < smo.alpha.size(); ++i) {
        if (smo.alpha(i) > 0) {
            support.push_back(i);
        }
    }
    model.support_vectors.resize(static_cast<Eigen::Index>(support.size()), d.x.cols());
    model.dual_coef.resize(static_cast<Eigen::Index>(support.size()));
    for (std::size_t s = 0; s < support.size(); ++s) {
        const auto i = support[s];
        model.support_vectors.row(static_cast<Eigen::Index>(s)) = d.x.row(i);
        model.dual_coef(static_cast<Eigen::Index>(s)) = smo.alpha(i) * signs[static_cast<std::size_t>(i)];
    }
    model.bias = smo.bias;
    return model;
}

// ---------------------------------------------------------------- forest

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double impurity = std::numeric_limits<double>::infinity();
};

double gini(double pos, double total) {
    if (total <= 0) {
        return 0.0;
    }
    const double p = pos / total;
    return 2.0 * p * (1.0 - p);
}

class TreeBuilder {
public:
    TreeBuilder(const Dataset& d, std::size_t per_split, std::optional<std::size_t> max_depth, Rng& rng)
        : d_(d), per_split_(per_split), max_depth_(max_depth), rng_(rng) {}

    DecisionTree build(std::vector<std::size_t> rows) {
        tree_.nodes.clear();
        grow(std::move(rows), 0);
        return std::move(tree_);
    }

private:
    int grow(std::vector<std::size_t> rows, std::size_t depth) {
        double pos = 0.0;
        for (auto r : rows) {
            pos += d_.labels[r] == kSuccess ? 1.0 : 0.0;
        }
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.push_back({});
        tree_.nodes[static_cast<std::size_t>(id)].value = pos / static_cast<double>(rows.size());

        const bool pure = pos == 0.0 || pos == static_cast<double>(rows.size());
        if (pure || rows.size() < 2 || (max_depth_ && depth >= *max_depth_)) {
            return id;
        }
        const SplitChoice split = best_split(rows);
        if (split.feature < 0) {
            return id;
        }
        std::vector<std::size_t> left, right;
        for (auto r : rows) {
            (d_.x(static_cast<Eigen::Index>(r), split.feature) <= split.threshold ? left : right).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        const int l = grow(std::move(left), depth + 1);
        const int r = grow(std::move(right), depth + 1);
        auto& node = tree_.nodes[static_cast<std::size_t>(id)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    // Examines per_split_ random features; when none of them can separate the
    // rows, keeps drawing from the rest so a splittable node always splits.
    SplitChoice best_split(const std::vector<std::size_t>& rows) {
        std::vector<std::size_t> order(d_.features());
        std::iota(order.begin(), order.end(), 0);
        rng_.shuffle(order);
        SplitChoice best;
        std::vector<std::pair<double, int>> column(rows.size());
        for (std::size_t idx = 0; idx < order.size(); ++idx) {
            if (idx >= per_split_ && best.feature >= 0) {
                break;
            }
            const auto f = static_cast<Eigen::Index>(order[idx]);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                column[i] = {d_.x(static_cast<Eigen::Index>(rows[i]), f), d_.labels[rows[i]]};
            }
            std::sort(column.begin(), column.end());
            double total_pos = 0.0;
            for (const auto& e : column) {
                total_pos += e.second == kSuccess ? 1.0 : 0.0;
            }
            const double n = static_cast<double>(column.size());
            double left_pos = 0.0;
            for (std::size_t i = 0; i + 1 < column.size(); ++i) {
                left_pos += column[i].second == kSuccess ? 1.0 : 0.0;
                if (column[i].first == column[i + 1].first) {
                    continue;
                }
                const double nl = static_cast<double>(i + 1);
                const double impurity =
                    (nl * gini(left_pos, nl) + (n - nl) * gini(total_pos - left_pos, n - nl)) / n;
                if (impurity < best.impurity) {
                    best.impurity = impurity;
                    best.feature = static_cast<int>(f);
                    best.threshold = 0.5 * (column[i].first + column[i + 1].first);
                    // Midpoint of adjacent doubles may round onto the upper value.
                    if (!(best.threshold < column[i + 1].first)) {
                        best.threshold = column[i].first;
                    }
                }
            }
        }
        return best;
    }

    const Dataset& d_;
    std::size_t per_split_;
    std::optional<std::size_t> max_depth_;
    Rng& rng_;
    DecisionTree tree_;
};

TrainedClassifier train_forest(const Dataset& d, const TrainConfig& config) {
    TrainedClassifier model;
    model.kind = ClassifierKind::random_forest;
    model.dim = d.features();
    model.features_per_split =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d.features())))));
    model.trees.resize(config.forest_trees);
    parallel_for(config.forest_trees, config.workers, [&](std::size_t t) {
        Rng rng(derive_seed(config.seed, 0x7ae5, t));
        std::vector<std::size_t> rows(d.rows());
        if (config.forest_bootstrap) {
            for (auto& r : rows) {
                r = rng.index(d.rows());
            }
            std::sort(rows.begin(), rows.end());
        } else {
            std::iota(rows.begin(), rows.end(), 0);
        }
        TreeBuilder builder(d, model.features_per_split, config.forest_max_depth, rng);
        model.trees[t] = builder.build(std::move(rows));
    });
    return model;
}

double forest_score(const TrainedClassifier& model, const double* row) {
    double votes = 0.0;
    for (const auto& tree : model.trees) {
        votes += tree.leaf_value(row) >= 0.5 ? 1.0 : 0.0;
    }
    return votes / static_cast<double>(model.trees.size());
}

}  // namespace

std::string to_string(ClassifierKind kind) {
    switch (kind) {
        case ClassifierKind::lda:
            return "lda";
        case ClassifierKind::logistic:
            return "logistic";
        case ClassifierKind::knn:
            return "knn";
        case ClassifierKind::svm_rbf:
            return "svm_rbf";
        case ClassifierKind::random_forest:
            return "random_forest";
    }
    return "unknown";
}

ClassifierKind parse_classifier_kind(const std::string& name) {
    for (auto kind : {ClassifierKind::lda, ClassifierKind::logistic, ClassifierKind::knn, ClassifierKind::svm_rbf,
                      ClassifierKind::random_forest}) {
        if (to_string(kind) == name) {
            return kind;
        }
    }
    throw ConfigError("unknown classifier kind: " + name);
}

ClassifierKind apply_preset(const std::string& name, TrainConfig& config) {
    if (name == "adaptive_knn") {
        config.knn_uniform = false;
        return ClassifierKind::knn;
    }
    if (name == "gaussian_svm") {
        config.svm_gamma_rule = GammaRule::median_heuristic;
        return ClassifierKind::svm_rbf;
    }
    if (name == "svm_rbf") {
        config.svm_gamma_rule = GammaRule::inverse_features;
        return ClassifierKind::svm_rbf;
    }
    return parse_classifier_kind(name);
}

void TrainConfig::validate() const {
    if (knn_k == 0 || knn_k % 2 == 0) {
        throw ConfigError("knn_k must be an odd positive integer");
    }
    if (!(svm_c > 0)) {
        throw ConfigError("svm_c must be positive");
    }
    if (svm_gamma_rule == GammaRule::fixed && !(svm_gamma > 0)) {
        throw ConfigError("svm_gamma must be positive");
    }
    if (!(svm_tol > 0)) {
        throw ConfigError("svm_tol must be positive");
    }
    if (!(logistic_l2 >= 0)) {
        throw ConfigError("logistic_l2 must be non-negative");
    }
    if (forest_trees == 0) {
        throw ConfigError("forest_trees must be positive");
    }
    if (forest_max_depth && *forest_max_depth == 0) {
        throw ConfigError("forest_max_depth must be positive");
    }
    if (workers == 0) {
        throw ConfigError("workers must be positive");
    }
}

namespace {

std::string gamma_rule_name(GammaRule rule) {
    switch (rule) {
        case GammaRule::fixed:
            return "fixed";
        case GammaRule::median_heuristic:
            return "median_heuristic";
        case GammaRule::inverse_features:
            return "inverse_features";
    }
    return "fixed";
}

}  // namespace

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"knn_k", c.knn_k},
         {"knn_uniform", c.knn_uniform},
         {"svm_c", c.svm_c},
         {"svm_gamma_rule", gamma_rule_name(c.svm_gamma_rule)},
         {"svm_gamma", c.svm_gamma},
         {"svm_tol", c.svm_tol},
         {"svm_max_iterations", c.svm_max_iterations},
         {"logistic_l2", c.logistic_l2},
         {"forest_trees", c.forest_trees},
         {"forest_max_depth", c.forest_max_depth ? nlohmann::json(*c.forest_max_depth) : nlohmann::json(nullptr)},
         {"forest_bootstrap", c.forest_bootstrap},
         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    c.knn_k = j.value("knn_k", c.knn_k);
    c.knn_uniform = j.value("knn_uniform", c.knn_uniform);
    c.svm_c = j.value("svm_c", c.svm_c);
    if (j.contains("svm_gamma_rule")) {
        const auto rule = j.at("svm_gamma_rule").get<std::string>();
        if (rule == "fixed") {
            c.svm_gamma_rule = GammaRule::fixed;
        } else if (rule == "median_heuristic") {
            c.svm_gamma_rule = GammaRule::median_heuristic;
        } else if (rule == "inverse_features") {
            c.svm_gamma_rule = GammaRule::inverse_features;
        } else {
            throw ConfigError("unknown svm_gamma_rule: " + rule);
        }
    }
    c.svm_gamma = j.value("svm_gamma", c.svm_gamma);
    c.svm_tol = j.value("svm_tol", c.svm_tol);
    c.svm_max_iterations = j.value("svm_max_iterations", c.svm_max_iterations);
    c.logistic_l2 = j.value("logistic_l2", c.logistic_l2);
    c.forest_trees = j.value("forest_trees", c.forest_trees);
    if (j.contains("forest_max_depth") && !j.at("forest_max_depth").is_null()) {
        c.forest_max_depth = j.at("forest_max_depth").get<std::size_t>();
    }
    c.forest_bootstrap = j.value("forest_bootstrap", c.forest_bootstrap);
    c.seed = j.value("seed", c.seed);
}

double DecisionTree::leaf_value(const double* row) const {
    std::size_t id = 0;
    while (nodes[id].feature >= 0) {
        id = static_cast<std::size_t>(row[nodes[id].feature] <= nodes[id].threshold ? nodes[id].left : nodes[id].right);
    }
    return nodes[id].value;
}

void to_json(nlohmann::json& j, const TrainedClassifier& model) {
    j = {{"kind", to_string(model.kind)}, {"dim", model.dim}};
    switch (model.kind) {
        case ClassifierKind::lda:
            j["class_means"] = matrix_json(model.class_means);
            j["covariance_inverse"] = matrix_json(model.covariance_inverse);
            j["priors"] = model.priors;
            break;
        case ClassifierKind::logistic:
            j["weights"] = vector_json(model.weights);
            j["intercept"] = model.intercept;
            break;
        case ClassifierKind::knn:
            j["train_x"] = matrix_json(model.train_x);
            j["train_y"] = model.train_y;
            j["k"] = model.k;
            j["uniform"] = model.uniform;
            break;
        case ClassifierKind::svm_rbf:
            j["support_vectors"] = matrix_json(model.support_vectors);
            j["dual_coef"] = vector_json(model.dual_coef);
            j["bias"] = model.bias;
            j["gamma"] = model.gamma;
            break;
        case ClassifierKind::random_forest: {
            nlohmann::json trees = nlohmann::json::array();
            for (const auto& tree : model.trees) {
                nlohmann::json nodes = nlohmann::json::array();
                for (const auto& n : tree.nodes) {
                    nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
                }
                trees.push_back(std::move(nodes));
            }
            j["trees"] = std::move(trees);
            j["features_per_split"] = model.features_per_split;
            break;
        }
    }
}

void from_json(const nlohmann::json& j, TrainedClassifier& model) {
    model = TrainedClassifier{};
    model.kind = parse_classifier_kind(j.at("kind").get<std::string>());
    model.dim = j.at("dim").get<std::size_t>();
    switch (model.kind) {
        case ClassifierKind::lda:
            model.class_means = matrix_from_json(j.at("class_means"));
            model.covariance_inverse = matrix_from_json(j.at("covariance_inverse"));
            model.priors = j.at("priors").get<std::vector<double>>();
            break;
        case ClassifierKind::logistic:
            model.weights = vector_from_json(j.at("weights"));
            model.intercept = j.at("intercept").get<double>();
            break;
        case ClassifierKind::knn:
            model.train_x = matrix_from_json(j.at("train_x"));
            model.train_y = j.at("train_y").get<std::vector<int>>();
            model.k = j.at("k").get<std::size_t>();
            model.uniform = j.at("uniform").get<bool>();
            break;
        case ClassifierKind::svm_rbf:
            model.support_vectors = matrix_from_json(j.at("support_vectors"));
            model.dual_coef = vector_from_json(j.at("dual_coef"));
            model.bias = j.at("bias").get<double>();
            model.gamma = j.at("gamma").get<double>();
            break;
        case ClassifierKind::random_forest:
            for (const auto& tree_json : j.at("trees")) {
                DecisionTree tree;
                for (const auto& n : tree_json) {
                    tree.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                                          n.at(3).get<int>(), n.at(4).get<double>()});
                }
                model.trees.push_back(std::move(tree));
            }
            model.features_per_split = j.at("features_per_split").get<std::size_t>();
            break;
    }
}

TrainedClassifier train(ClassifierKind kind, const Dataset& dataset, const TrainConfig& config) {
    config.validate();
    require_two_classes(dataset);
    switch (kind) {
        case ClassifierKind::lda:
            return train_lda(dataset);
        case ClassifierKind::logistic:
            return train_logistic(dataset, config);
        case ClassifierKind::knn: {
            TrainedClassifier model;
            model.kind = kind;
            model.dim = dataset.features();
            model.train_x = dataset.x;
            model.train_y = dataset.labels;
            model.k = config.knn_k;
            model.uniform = config.knn_uniform;
            return model;
        }
        case ClassifierKind::svm_rbf:
            return train_svm(dataset, config);
        case ClassifierKind::random_forest:
            return train_forest(dataset, config);
    }
    throw ConfigError("unknown classifier kind");
}

Prediction predict(const TrainedClassifier& model, const Matrix& rows, std::size_t workers) {
    if (static_cast<std::size_t>(rows.cols()) != model.dim) {
        throw DataError("row dimension " + std::to_string(rows.cols()) + " does not match trained dimension " +
                        std::to_string(model.dim));
    }
    const auto n = static_cast<std::size_t>(rows.rows());
    Prediction out;
    out.scores.assign(n, 0.0);
    if (model.kind == ClassifierKind::logistic) {
        const Vector z = (rows * model.weights).array() + model.intercept;
        for (std::size_t i = 0; i < n; ++i) {
            out.scores[i] = sigmoid(z(static_cast<Eigen::Index>(i)));
        }
    } else if (model.kind == ClassifierKind::svm_rbf) {
        const Vector f = (rbf_kernel(rows, model.support_vectors, model.gamma) * model.dual_coef).array() + model.bias;
        for (std::size_t i = 0; i < n; ++i) {
            out.scores[i] = sigmoid(f(static_cast<Eigen::Index>(i)));
        }
    } else {
        // Row-major copy so forest traversal can index a contiguous row.
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = rows;
        parallel_for(n, workers, [&](std::size_t i) {
            const auto r = static_cast<Eigen::Index>(i);
            switch (model.kind) {
                case ClassifierKind::lda:
                    out.scores[i] = lda_score(model, rows.row(r).transpose());
                    break;
                case ClassifierKind::knn:
                    out.scores[i] = knn_score(model, rows.row(r).transpose());
                    break;
                case ClassifierKind::random_forest:
                    out.scores[i] = forest_score(model, rm.row(r).data());
                    break;
                default:
                    break;
            }
        });
    }
    out.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.labels[i] = out.scores[i] >= 0.5 ? kSuccess : kFailure;
    }
    return out;
}

double rbf_median_gamma(const Matrix& x, std::uint64_t seed, std::size_t subsample) {
    std::vector<std::size_t> rows(static_cast<std::size_t>(x.rows()));
    std::iota(rows.begin(), rows.end(), 0);
    if (rows.size() > subsample) {
        Rng rng(derive_seed(seed, 0x6a33a));
        rng.shuffle(rows);
        rows.resize(subsample);
        std::sort(rows.begin(), rows.end());
    }
    std::vector<double> dist;
    dist.reserve(rows.size() * (rows.size() - 1) / 2);
    for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t b = a + 1; b < rows.size(); ++b) {
            dist.push_back(
                (x.row(static_cast<Eigen::Index>(rows[a])) - x.row(static_cast<Eigen::Index>(rows[b]))).norm());
        }
    }
    const double med = dist.empty() ? 0.0 : median(std::move(dist));
    if (!(med > 0)) {
        return 1.0 / static_cast<double>(x.cols());
    }
    return 1.0 / (2.0 * med * med);
}

SmoResult smo_solve(const Matrix& kernel, const std::vector<int>& signs, double c, double tol,
                    std::size_t max_iterations) {
    const auto n = static_cast<Eigen::Index>(signs.size());
    if (kernel.rows() != n || kernel.cols() != n) {
        throw DataError("kernel matrix does not match label count");
    }
    auto y = [&](Eigen::Index i) { return static_cast<double>(signs[static_cast<std::size_t>(i)]); };
    Vector alpha = Vector::Zero(n);
    // Gradient of 0.5 a'Qa - e'a with Q_ij = y_i y_j K_ij.
    Vector grad = Vector::Constant(n, -1.0);

    SmoResult result;
    for (result.iterations = 0; result.iterations < max_iterations; ++result.iterations) {
        double g_max = -std::numeric_limits<double>::infinity();
        Eigen::Index i = -1;
        for (Eigen::Index t = 0; t < n; ++t) {
            const bool up = y(t) > 0 ? alpha(t) < c : alpha(t) > 0;
            if (up && -y(t) * grad(t) >= g_max) {
                g_max = -y(t) * grad(t);
                i = t;
            }
        }
        double g_min_side = -std::numeric_limits<double>::infinity();
        double best_obj = std::numeric_limits<double>::infinity();
        Eigen::Index j = -1;
        for (Eigen::Index t = 0; t < n; ++t) {
            const bool low = y(t) > 0 ? alpha(t) > 0 : alpha(t) < c;
            if (!low) {
                continue;
            }
            const double v = y(t) * grad(t);
            g_min_side = std::max(g_min_side, v);
            const double b = g_max + v;
            if (i >= 0 && b > 0) {
                double a = kernel(i, i) + kernel(t, t) - 2.0 * kernel(i, t);
                if (a <= 0) {
                    a = kTau;
                }
                const double obj = -b * b / a;
                if (obj <= best_obj) {
                    best_obj = obj;
                    j = t;
                }
            }
        }
        result.violation = g_max + g_min_side;
        if (i < 0 || j < 0 || result.violation < tol) {
            break;
        }

        const double ai_old = alpha(i), aj_old = alpha(j);
        double quad = kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j);
        if (quad <= 0) {
            quad = kTau;
        }
        if (y(i) != y(j)) {
            const double delta = (-grad(i) - grad(j)) / quad;
            const double diff = alpha(i) - alpha(j);
            alpha(i) += delta;
            alpha(j) += delta;
            if (diff > 0) {
                if (alpha(j) < 0) {
                    alpha(j) = 0;
                    alpha(i) = diff;
                }
            } else if (alpha(i) < 0) {
                alpha(i) = 0;
                alpha(j) = -diff;
            }
            if (diff > 0) {
                if (alpha(i) > c) {
                    alpha(i) = c;
                    alpha(j) = c - diff;
                }
            } else if (alpha(j) > c) {
                alpha(j) = c;
                alpha(i) = c + diff;
            }
        } else {
            const double delta = (grad(i) - grad(j)) / quad;
            const double sum = alpha(i) + alpha(j);
            alpha(i) -= delta;
            alpha(j) += delta;
            if (sum > c) {
                if (alpha(i) > c) {
                    alpha(i) = c;
                    alpha(j) = sum - c;
                }
            } else if (alpha(j) < 0) {
                alpha(j) = 0;
                alpha(i) = sum;
            }
            if (sum > c) {
                if (alpha(j) > c) {
                    alpha(j) = c;
                    alpha(i) = sum - c;
                }
            } else if (alpha(i) < 0) {
                alpha(i) = 0;
                alpha(j) = sum;
            }
        }
        const double di = alpha(i) - ai_old, dj = alpha(j) - aj_old;
        for (Eigen::Index t = 0; t < n; ++t) {
            grad(t) += y(t) * (y(i) * kernel(i, t) * di + y(j) * kernel(j, t) * dj);
        }
    }

    // Bias from free vectors, or the midpoint of the feasible interval.
    double sum_free = 0.0, n_free = 0.0;
    double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
        const double yg = y(t) * grad(t);
        if (alpha(t) >= c) {
            if (y(t) < 0) {
                ub = std::min(ub, yg);
            } else {
                lb = std::max(lb, yg);
            }
        } else if (alpha(t) <= 0) {
            if (y(t) > 0) {
                ub = std::min(ub, yg);
            } else {
                lb = std::max(lb, yg);
            }
        } else {
            sum_free += yg;
            n_free += 1.0;
        }
    }
    const double rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
    result.alpha = std::move(alpha);
    result.bias = -rho;
    return result;
}

}  // namespace gafs
