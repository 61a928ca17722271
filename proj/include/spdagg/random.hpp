#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "spdagg/matrix.hpp"

namespace spdagg {

/// Seeded pseudo-random stream. Same seed, same sequence of calls, same values.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1), 53 bits.
    double uniform();
    double normal();
    std::size_t index(std::size_t n);
    std::uint64_t next_u64() { return engine_(); }

    Matrix normal_matrix(std::size_t rows, std::size_t cols, double stddev = 1.0);

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) std::swap(values[i - 1], values[index(i)]);
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

inline RandomStream seeded_rng(std::uint64_t seed) { return RandomStream(seed); }

}  // namespace spdagg
