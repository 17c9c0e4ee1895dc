#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "gafs/dataset.hpp"

namespace gafs::testing {

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const std::filesystem::path dir = std::filesystem::path(GAFS_TEST_TMP) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Two Gaussian blobs in `m` dimensions, centers at -shift and +shift on every axis.
inline Dataset two_blobs(std::size_t per_class, std::size_t m, double shift, std::uint64_t seed) {
    Rng rng(seed);
    Matrix x(2 * per_class, m);
    std::vector<int> labels(2 * per_class);
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
        const int label = i < per_class ? kFailure : kSuccess;
        labels[i] = label;
        for (std::size_t j = 0; j < m; ++j) {
            x(i, j) = rng.normal() + (label == kSuccess ? shift : -shift);
        }
    }
    return make_dataset(std::move(x), std::move(labels));
}

}  // namespace gafs::testing
