#pragma once

#include <cstdint>
#include <vector>

#include "spdagg/matrix.hpp"

namespace spdagg {

/// Labelled feature tensors sharing one shape.
struct FtsDataset {
    std::uint32_t channels = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t num_classes = 0;
    std::vector<FeatureTensor> samples;
    std::vector<std::uint32_t> labels;

    std::size_t size() const noexcept { return samples.size(); }

    /// Throws ContractError on shape or label violations.
    void validate() const;

    bool operator==(const FtsDataset& other) const = default;
};

/// Samples [begin, end) as a new dataset with the same manifest.
FtsDataset slice(const FtsDataset& ds, std::size_t begin, std::size_t end);

}  // namespace spdagg
