#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gafs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Bad input data (malformed files, degenerate datasets, dimension mismatch).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or parameters.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure during a computation (divergence, non-finite values).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Binary chromosome: bit i set means feature i is selected.
class SelectionMask {
public:
    SelectionMask() = default;
    explicit SelectionMask(std::size_t size, bool value = false)
        : bits_(size, value ? 1 : 0) {}
    explicit SelectionMask(std::vector<std::uint8_t> bits);

    static SelectionMask from_string(const std::string& bits);
    static SelectionMask from_indices(std::size_t size, const std::vector<std::size_t>& indices);

    std::size_t size() const { return bits_.size(); }
    bool test(std::size_t i) const { return bits_[i] != 0; }
    void set(std::size_t i, bool value = true) { bits_[i] = value ? 1 : 0; }
    void flip(std::size_t i) { bits_[i] ^= 1; }

    std::size_t count() const;
    bool none() const { return count() == 0; }
    std::vector<std::size_t> indices() const;
    std::string to_string() const;
    const std::vector<std::uint8_t>& bits() const { return bits_; }

    bool is_subset_of(const SelectionMask& other) const;

    friend bool operator==(const SelectionMask&, const SelectionMask&) = default;

private:
    std::vector<std::uint8_t> bits_;
};

struct SelectionMaskHash {
    std::size_t operator()(const SelectionMask& mask) const;
};

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Seed for stream (a, b) of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Deterministic random source. Distribution helpers are implemented here
/// rather than with <random> distributions so draws are identical across
/// standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n);
    bool bernoulli(double p) { return uniform() < p; }
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::swap(values[i - 1], values[index(i)]);
        }
    }

    std::mt19937_64& engine() { return engine_; }
    const std::mt19937_64& engine() const { return engine_; }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Runs body(i) for i in [0, count) on up to `workers` threads. Exceptions
/// from any index are rethrown (lowest index first) after all workers join.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& body);

/// Writes `content` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

/// Median of a copy of values; mean of the middle pair for even sizes.
double median(std::vector<double> values);

}  // namespace gafs
