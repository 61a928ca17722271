#include "spdagg/synth.hpp"

#include <cmath>

#include "spdagg/errors.hpp"
#include "spdagg/random.hpp"

namespace spdagg {

namespace {

constexpr double kNoiseVariance = 0.1;

// Mixing factors A_k; stream 0 of the seed is reserved for them so that the
// class structure does not depend on how many samples are drawn.
std::vector<Matrix> class_factors(std::size_t num_classes, std::size_t c0, std::uint64_t seed) {
    RandomStream rng(seed);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(c0));
    const Matrix base = rng.normal_matrix(c0, c0, stddev);
    std::vector<Matrix> factors;
    for (std::size_t k = 0; k < num_classes; ++k) {
        factors.push_back(add(base, scale(rng.normal_matrix(c0, c0, stddev), kSynthClassSpread)));
    }
    return factors;
}

}  // namespace

std::vector<Matrix> synth_class_covariances(std::size_t num_classes, std::size_t c0, std::uint64_t seed) {
    std::vector<Matrix> out;
    for (const Matrix& a : class_factors(num_classes, c0, seed)) {
        Matrix sigma = matmul(a, transpose(a));
        for (std::size_t i = 0; i < c0; ++i) sigma(i, i) += kNoiseVariance;
        out.push_back(symmetrize(sigma));
    }
    return out;
}

FtsDataset synth_generate(std::size_t num_classes, std::size_t per_class, std::size_t c0, std::size_t h,
                          std::size_t w, std::uint64_t seed) {
    if (num_classes < 2) throw ContractError("synth_generate: need at least 2 classes");
    if (per_class < 1 || c0 < 1 || h * w < 2) {
        throw ContractError("synth_generate: need per_class >= 1, c0 >= 1, h*w >= 2");
    }
    const std::vector<Matrix> factors = class_factors(num_classes, c0, seed);
    RandomStream rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const double noise = std::sqrt(kNoiseVariance);

    FtsDataset ds;
    ds.channels = static_cast<std::uint32_t>(c0);
    ds.height = static_cast<std::uint32_t>(h);
    ds.width = static_cast<std::uint32_t>(w);
    ds.num_classes = static_cast<std::uint32_t>(num_classes);

    const std::size_t n = h * w;
    const std::size_t total = num_classes * per_class;
    std::vector<double> z(c0);
    for (std::size_t s = 0; s < total; ++s) {
        const std::size_t label = s % num_classes;
        const Matrix& a = factors[label];
        FeatureTensor x(c0, h, w);
        for (std::size_t pos = 0; pos < n; ++pos) {
            for (double& v : z) v = rng.normal();
            for (std::size_t c = 0; c < c0; ++c) {
                double v = noise * rng.normal();
                for (std::size_t k = 0; k < c0; ++k) v += a(c, k) * z[k];
                x.data()[c * n + pos] = static_cast<double>(static_cast<float>(v));
            }
        }
        ds.samples.push_back(std::move(x));
        ds.labels.push_back(static_cast<std::uint32_t>(label));
    }
    return ds;
}

}  // namespace spdagg
