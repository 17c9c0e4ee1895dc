#include "acceptance/planted.hpp"

namespace gafs::testing {

Dataset planted_dataset(const PlantedSpec& spec) {
    Rng rng(derive_seed(spec.seed, 0x91a7));
    Matrix x(spec.rows, spec.features);
    std::vector<int> labels(spec.rows);
    for (std::size_t i = 0; i < spec.rows; ++i) {
        for (std::size_t j = 0; j < spec.features; ++j) {
            x(i, j) = rng.normal();
        }
        double signal = spec.noise * rng.normal();
        for (std::size_t j : spec.informative) {
            signal += x(i, j);
        }
        labels[i] = signal > 0.0 ? kSuccess : kFailure;
    }
    return make_dataset(std::move(x), std::move(labels));
}

}  // namespace gafs::testing
