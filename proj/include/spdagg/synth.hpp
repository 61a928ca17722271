#pragma once

#include <cstdint>
#include <vector>

#include "spdagg/dataset.hpp"

namespace spdagg {

/// Class covariances Sigma_k = A_k A_k^T + 0.1 I used by synth_generate.
/// A_k = B + kSynthClassSpread * D_k with a shared base B and a
/// class-specific D_k, entries of both drawn N(0, 1/c0) from the seed.
std::vector<Matrix> synth_class_covariances(std::size_t num_classes, std::size_t c0, std::uint64_t seed);

inline constexpr double kSynthClassSpread = 0.5;

/// Second-order synthetic dataset: every spatial position of a class-k
/// sample is an independent zero-mean Gaussian vector with covariance
/// Sigma_k. Classes share first-order statistics. Labels are interleaved
/// (sample i has label i % num_classes) so any prefix is class-balanced.
/// Values are rounded to float32 so the dataset survives FTS round trips.
FtsDataset synth_generate(std::size_t num_classes, std::size_t per_class, std::size_t c0, std::size_t h,
                          std::size_t w, std::uint64_t seed);

}  // namespace spdagg
