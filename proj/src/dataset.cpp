#include "gafs/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace gafs {
namespace {

std::string feature_name(std::size_t j) { return "f" + std::to_string(j); }

std::optional<double> parse_real(const std::string& token) {
    if (token.empty()) {
        return std::nullopt;
    }
    if (token == "NaN" || token == "nan" || token == "NA") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    double value = 0.0;
    const char* begin = token.data();
    const char* end = token.data() + token.size();
    if (*begin == '+') {
        ++begin;
    }
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        return std::nullopt;
    }
    return value;
}

// Splits one CSV record, honoring double-quoted fields with "" escapes.
// Records spanning multiple physical lines are not supported.
std::vector<std::string> split_csv_record(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string escape_csv(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out.push_back(c);
        }
    }
    return out + "\"";
}

std::vector<std::int64_t> identity_origin(std::size_t n) {
    std::vector<std::int64_t> origin(n);
    std::iota(origin.begin(), origin.end(), std::int64_t{0});
    return origin;
}

Dataset select_columns(const Dataset& dataset, const std::vector<std::size_t>& columns) {
    Dataset out;
    const auto n = static_cast<Eigen::Index>(dataset.rows());
    out.x.resize(n, static_cast<Eigen::Index>(columns.size()));
    out.missing.resize(n, static_cast<Eigen::Index>(columns.size()));
    const bool has_mask = dataset.missing.size() > 0;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const auto src = static_cast<Eigen::Index>(columns[c]);
        out.x.col(static_cast<Eigen::Index>(c)) = dataset.x.col(src);
        if (has_mask) {
            out.missing.col(static_cast<Eigen::Index>(c)) = dataset.missing.col(src);
        } else {
            out.missing.col(static_cast<Eigen::Index>(c)).setConstant(false);
        }
        out.feature_names.push_back(dataset.feature_names[columns[c]]);
    }
    out.labels = dataset.labels;
    out.row_origin = dataset.row_origin;
    return out;
}

}  // namespace

std::size_t Dataset::count_label(int label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

void Dataset::validate() const {
    if (labels.size() != rows()) {
        throw DataError("label count " + std::to_string(labels.size()) + " does not match row count " +
                        std::to_string(rows()));
    }
    if (feature_names.size() != features()) {
        throw DataError("feature name count does not match feature count");
    }
    if (missing.size() > 0 && (static_cast<std::size_t>(missing.rows()) != rows() ||
                               static_cast<std::size_t>(missing.cols()) != features())) {
        throw DataError("missing mask shape does not match data");
    }
    if (row_origin.size() != rows()) {
        throw DataError("row provenance length does not match row count");
    }
    for (int y : labels) {
        if (y != kFailure && y != kSuccess) {
            throw DataError("labels must be 0 or 1");
        }
    }
}

Dataset make_dataset(Matrix x, std::vector<int> labels, std::vector<std::string> feature_names) {
    Dataset ds;
    const auto m = static_cast<std::size_t>(x.cols());
    if (feature_names.empty()) {
        for (std::size_t j = 0; j < m; ++j) {
            feature_names.push_back(feature_name(j));
        }
    }
    ds.missing = MissingMask::Constant(x.rows(), x.cols(), false);
    ds.row_origin = identity_origin(static_cast<std::size_t>(x.rows()));
    ds.x = std::move(x);
    ds.labels = std::move(labels);
    ds.feature_names = std::move(feature_names);
    ds.validate();
    return ds;
}

ImputePolicy parse_impute_policy(const std::string& name, double threshold) {
    if (name == "mean" || name == "column-mean") {
        return ImputePolicy::mean();
    }
    if (name == "median" || name == "column-median") {
        return ImputePolicy::median_policy();
    }
    if (name == "drop" || name == "drop-feature") {
        if (!(threshold >= 0.0 && threshold <= 1.0)) {
            throw ConfigError("drop-feature threshold must be in [0, 1]");
        }
        return ImputePolicy::drop(threshold);
    }
    throw ConfigError("unknown impute policy '" + name + "'");
}

Dataset load_secom(const std::string& features_path, const std::string& labels_path) {
    std::ifstream features(features_path);
    if (!features) {
        throw DataError("cannot open SECOM features file " + features_path);
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(features, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        std::istringstream in(line);
        std::vector<double> row;
        std::string token;
        while (in >> token) {
            auto value = parse_real(token);
            if (!value) {
                throw DataError("non-numeric token '" + token + "' at " + features_path + ":" +
                                std::to_string(line_no));
            }
            row.push_back(*value);
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw DataError("ragged row at " + features_path + ":" + std::to_string(line_no));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw DataError("SECOM features file is empty: " + features_path);
    }

    std::ifstream labels_in(labels_path);
    if (!labels_in) {
        throw DataError("cannot open SECOM labels file " + labels_path);
    }
    std::vector<int> labels;
    line_no = 0;
    while (std::getline(labels_in, line)) {
        ++line_no;
        std::istringstream in(line);
        std::string token;
        if (!(in >> token)) {
            continue;
        }
        auto value = parse_real(token);
        if (!value || (*value != -1.0 && *value != 1.0)) {
            throw DataError("label must be -1 or 1 at " + labels_path + ":" + std::to_string(line_no));
        }
        labels.push_back(*value < 0 ? kSuccess : kFailure);
    }
    if (labels.empty()) {
        throw DataError("SECOM labels file is empty: " + labels_path);
    }
    if (labels.size() != rows.size()) {
        throw DataError("row-count mismatch: " + std::to_string(rows.size()) + " feature rows vs " +
                        std::to_string(labels.size()) + " labels");
    }

    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto m = static_cast<Eigen::Index>(rows.front().size());
    Dataset ds;
    ds.x.resize(n, m);
    ds.missing.resize(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            const double v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            ds.missing(i, j) = std::isnan(v);
            ds.x(i, j) = v;
        }
    }
    for (Eigen::Index j = 0; j < m; ++j) {
        ds.feature_names.push_back(feature_name(static_cast<std::size_t>(j)));
    }
    ds.labels = std::move(labels);
    ds.row_origin = identity_origin(rows.size());
    ds.validate();
    return ds;
}

Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::map<std::string, int>& label_map) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open CSV file " + path);
    }
    std::string line;
    if (!std::getline(in, line) || trim(line).empty()) {
        throw DataError("missing header in " + path);
    }
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        line.erase(0, 3);
    }
    const auto header = split_csv_record(line);
    std::size_t label_index = header.size();
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (trim(header[j]) == label_column) {
            label_index = j;
        }
    }
    if (label_index == header.size()) {
        throw DataError("label column '" + label_column + "' not found in " + path);
    }

    std::vector<std::vector<std::string>> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        auto fields = split_csv_record(line);
        if (fields.size() != header.size()) {
            throw DataError("ragged row at " + path + ":" + std::to_string(line_no));
        }
        records.push_back(std::move(fields));
    }
    if (records.empty()) {
        throw DataError("no data rows in " + path);
    }

    std::map<std::string, int> mapping = label_map;
    if (mapping.empty()) {
        std::set<std::string> values;
        for (const auto& r : records) {
            values.insert(trim(r[label_index]));
        }
        if (values.size() > 2) {
            throw DataError("label column has more than two distinct values");
        }
        int next = 0;
        for (const auto& v : values) {
            mapping[v] = next++;
        }
    }

    const auto n = static_cast<Eigen::Index>(records.size());
    const auto m = static_cast<Eigen::Index>(header.size() - 1);
    Dataset ds;
    ds.x.resize(n, m);
    ds.missing.resize(n, m);
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j != label_index) {
            ds.feature_names.push_back(trim(header[j]));
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& rec = records[static_cast<std::size_t>(i)];
        const auto label = trim(rec[label_index]);
        auto it = mapping.find(label);
        if (it == mapping.end()) {
            throw DataError("label value '" + label + "' has no mapping");
        }
        ds.labels.push_back(it->second);
        Eigen::Index col = 0;
        for (std::size_t j = 0; j < rec.size(); ++j) {
            if (j == label_index) {
                continue;
            }
            const auto token = trim(rec[j]);
            if (token.empty()) {
                ds.missing(i, col) = true;
                ds.x(i, col) = std::numeric_limits<double>::quiet_NaN();
            } else {
                auto value = parse_real(token);
                if (!value) {
                    throw DataError("non-numeric value '" + token + "' in column '" + header[j] + "'");
                }
                ds.missing(i, col) = std::isnan(*value);
                ds.x(i, col) = *value;
            }
            ++col;
        }
    }
    ds.row_origin = identity_origin(records.size());
    ds.validate();
    return ds;
}

void write_csv(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path);
    }
    out.precision(17);
    for (const auto& name : dataset.feature_names) {
        out << escape_csv(name) << ',';
    }
    out << "label\n";
    const bool has_mask = dataset.missing.size() > 0;
    for (std::size_t i = 0; i < dataset.rows(); ++i) {
        for (std::size_t j = 0; j < dataset.features(); ++j) {
            const auto r = static_cast<Eigen::Index>(i);
            const auto c = static_cast<Eigen::Index>(j);
            if (!(has_mask && dataset.missing(r, c))) {
                out << dataset.x(r, c);
            }
            out << ',';
        }
        out << dataset.labels[i] << '\n';
    }
}

Dataset impute_missing(const Dataset& dataset, const ImputePolicy& policy) {
    dataset.validate();
    const auto n = static_cast<Eigen::Index>(dataset.rows());
    const auto m = dataset.features();
    if (n == 0) {
        throw DataError("cannot impute an empty dataset");
    }
    const bool has_mask = dataset.missing.size() > 0;
    auto is_missing = [&](Eigen::Index i, Eigen::Index j) {
        return (has_mask && dataset.missing(i, j)) || std::isnan(dataset.x(i, j));
    };

    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < m; ++j) {
        const auto c = static_cast<Eigen::Index>(j);
        Eigen::Index missing = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            missing += is_missing(i, c) ? 1 : 0;
        }
        const double fraction = static_cast<double>(missing) / static_cast<double>(n);
        if (policy.kind == ImputeKind::drop_feature) {
            if (fraction > policy.drop_threshold || missing == n) {
                continue;
            }
        } else if (missing == n) {
            throw DataError("feature '" + dataset.feature_names[j] + "' is entirely missing");
        }
        keep.push_back(j);
    }
    if (keep.empty()) {
        throw DataError("imputation dropped every feature");
    }

    Dataset out = select_columns(dataset, keep);
    for (Eigen::Index c = 0; c < out.x.cols(); ++c) {
        const auto src = static_cast<Eigen::Index>(keep[static_cast<std::size_t>(c)]);
        std::vector<double> observed;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!is_missing(i, src)) {
                observed.push_back(dataset.x(i, src));
            }
        }
        if (observed.size() == static_cast<std::size_t>(n)) {
            continue;
        }
        double fill = 0.0;
        if (policy.kind == ImputeKind::column_median) {
            fill = median(observed);
        } else {
            fill = std::accumulate(observed.begin(), observed.end(), 0.0) / static_cast<double>(observed.size());
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            if (is_missing(i, src)) {
                out.x(i, c) = fill;
            }
        }
    }
    out.missing.setConstant(false);
    return out;
}

std::pair<Dataset, ScalingParams> standardize(const Dataset& dataset) {
    if (dataset.has_missing()) {
        throw DataError("standardize requires an imputed dataset");
    }
    const auto n = dataset.x.rows();
    const auto m = dataset.x.cols();
    if (n < 2) {
        throw DataError("standardize requires at least two rows");
    }
    ScalingParams params;
    params.mean = dataset.x.colwise().mean().transpose();
    params.stddev.resize(m);
    params.zero_variance.assign(static_cast<std::size_t>(m), false);
    for (Eigen::Index j = 0; j < m; ++j) {
        const double ss = (dataset.x.col(j).array() - params.mean(j)).square().sum();
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        params.stddev(j) = sd;
        // Relative cutoff: a constant column can pick up rounding residue.
        const double scale = std::max(1.0, std::abs(params.mean(j)));
        params.zero_variance[static_cast<std::size_t>(j)] = !(sd > 1e-12 * scale);
    }
    return {apply_scaling(dataset, params), params};
}

Dataset apply_scaling(const Dataset& dataset, const ScalingParams& params) {
    if (params.mean.size() != dataset.x.cols() || params.stddev.size() != dataset.x.cols()) {
        throw DataError("scaling parameters do not match feature count");
    }
    Dataset out = dataset;
    for (Eigen::Index j = 0; j < out.x.cols(); ++j) {
        if (params.zero_variance[static_cast<std::size_t>(j)]) {
            out.x.col(j).setZero();
        } else {
            out.x.col(j) = (out.x.col(j).array() - params.mean(j)) / params.stddev(j);
        }
    }
    return out;
}

std::vector<std::size_t> split_train_indices(const std::vector<int>& labels, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw ConfigError("train_fraction must be in (0, 1)");
    }
    const std::size_t n = labels.size();
    const auto n_train = static_cast<std::size_t>(std::ceil(spec.train_fraction * static_cast<double>(n) - 1e-9));
    if (n_train == 0 || n_train >= n) {
        throw DataError("split of " + std::to_string(n) + " rows at fraction " +
                        std::to_string(spec.train_fraction) + " leaves an empty partition");
    }
    Rng rng(derive_seed(spec.seed, 0x5b11));

    std::vector<std::size_t> train;
    if (!spec.stratified) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);
        train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    } else {
        std::vector<std::vector<std::size_t>> groups(2);
        for (std::size_t i = 0; i < n; ++i) {
            groups[static_cast<std::size_t>(labels[i])].push_back(i);
        }
        for (std::size_t c = 0; c < 2; ++c) {
            if (groups[c].empty()) {
                throw DataError("stratified split: class " + std::to_string(c) + " has no members");
            }
        }
        // Floor of each class's ideal share, then hand the remaining slots to
        // the largest fractional remainders. Classes with >= 2 members keep at
        // least one row on each side.
        std::array<std::size_t, 2> quota{};
        std::array<std::size_t, 2> cap{};
        std::array<double, 2> remainder{};
        std::size_t assigned = 0;
        for (std::size_t c = 0; c < 2; ++c) {
            const double ideal = spec.train_fraction * static_cast<double>(groups[c].size());
            cap[c] = groups[c].size() >= 2 ? groups[c].size() - 1 : groups[c].size();
            quota[c] = std::min(cap[c], static_cast<std::size_t>(std::floor(ideal + 1e-9)));
            if (groups[c].size() >= 2 && quota[c] == 0) {
                quota[c] = 1;
            }
            remainder[c] = ideal - static_cast<double>(quota[c]);
            assigned += quota[c];
        }
        while (assigned < n_train) {
            std::size_t best = 2;
            for (std::size_t c = 0; c < 2; ++c) {
                if (quota[c] < cap[c] && (best == 2 || remainder[c] > remainder[best])) {
                    best = c;
                }
            }
            if (best == 2) {
                break;
            }
            ++quota[best];
            remainder[best] -= 1.0;
            ++assigned;
        }
        while (assigned > n_train) {
            std::size_t best = 2;
            for (std::size_t c = 0; c < 2; ++c) {
                if (quota[c] > 1 && (best == 2 || remainder[c] < remainder[best])) {
                    best = c;
                }
            }
            if (best == 2) {
                break;
            }
            --quota[best];
            remainder[best] += 1.0;
            --assigned;
        }
        for (std::size_t c = 0; c < 2; ++c) {
            auto group = groups[c];
            rng.shuffle(group);
            train.insert(train.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(quota[c]));
        }
        if (train.size() == n) {
            throw DataError("stratified split leaves an empty test partition");
        }
    }
    std::sort(train.begin(), train.end());
    return train;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, const SplitSpec& spec) {
    dataset.validate();
    const auto train = split_train_indices(dataset.labels, spec);
    std::vector<std::size_t> test;
    std::size_t t = 0;
    for (std::size_t i = 0; i < dataset.rows(); ++i) {
        if (t < train.size() && train[t] == i) {
            ++t;
        } else {
            test.push_back(i);
        }
    }
    return {select_rows(dataset, train), select_rows(dataset, test)};
}

Dataset project(const Dataset& dataset, const SelectionMask& mask) {
    if (mask.size() != dataset.features()) {
        throw DataError("mask length " + std::to_string(mask.size()) + " does not match " +
                        std::to_string(dataset.features()) + " features");
    }
    if (mask.none()) {
        throw DataError("empty selection");
    }
    return select_columns(dataset, mask.indices());
}

Dataset select_rows(const Dataset& dataset, const std::vector<std::size_t>& rows) {
    Dataset out;
    const auto m = dataset.x.cols();
    out.x.resize(static_cast<Eigen::Index>(rows.size()), m);
    out.missing.resize(static_cast<Eigen::Index>(rows.size()), m);
    const bool has_mask = dataset.missing.size() > 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= dataset.rows()) {
            throw DataError("row index out of range");
        }
        const auto dst = static_cast<Eigen::Index>(r);
        const auto src = static_cast<Eigen::Index>(rows[r]);
        out.x.row(dst) = dataset.x.row(src);
        if (has_mask) {
            out.missing.row(dst) = dataset.missing.row(src);
        } else {
            out.missing.row(dst).setConstant(false);
        }
        out.labels.push_back(dataset.labels[rows[r]]);
        out.row_origin.push_back(dataset.row_origin[rows[r]]);
    }
    out.feature_names = dataset.feature_names;
    return out;
}

Dataset append_rows(const Dataset& top, const Dataset& bottom) {
    if (top.features() != bottom.features()) {
        throw DataError("cannot append datasets with different feature counts");
    }
    Dataset out;
    out.x.resize(top.x.rows() + bottom.x.rows(), top.x.cols());
    out.x << top.x, bottom.x;
    out.missing.resize(out.x.rows(), out.x.cols());
    if (top.missing.size() > 0) {
        out.missing.topRows(top.x.rows()) = top.missing;
    } else {
        out.missing.topRows(top.x.rows()).setConstant(false);
    }
    if (bottom.missing.size() > 0) {
        out.missing.bottomRows(bottom.x.rows()) = bottom.missing;
    } else {
        out.missing.bottomRows(bottom.x.rows()).setConstant(false);
    }
    out.labels = top.labels;
    out.labels.insert(out.labels.end(), bottom.labels.begin(), bottom.labels.end());
    out.row_origin = top.row_origin;
    out.row_origin.insert(out.row_origin.end(), bottom.row_origin.begin(), bottom.row_origin.end());
    out.feature_names = top.feature_names;
    return out;
}

}  // namespace gafs
