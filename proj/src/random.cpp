#include "spdagg/random.hpp"

#include <limits>

#include "spdagg/errors.hpp"

namespace spdagg {

double RandomStream::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::normal() { return normal_(engine_); }

std::size_t RandomStream::index(std::size_t n) {
    if (n == 0) throw ContractError("RandomStream::index: empty range");
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
}

Matrix RandomStream::normal_matrix(std::size_t rows, std::size_t cols, double stddev) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = stddev * normal();
    return m;
}

}  // namespace spdagg
