#pragma once

// FTS dataset container, little-endian throughout:
//
//   "FTS1" | version u32 = 1 | num_samples u32 | C0 u32 | H u32 | W u32
//   | num_classes u32 | labels u32[num_samples]
//   | payload f32[num_samples * C0 * H * W], row-major [C, H, W] per sample
//
// Checkpoint container:
//
//   "FTSP" | version u32 = 1 | block_count u32
//   | per block: name_len u32, name bytes, rows u32, cols u32, f64[rows * cols]

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spdagg/dataset.hpp"
#include "spdagg/network.hpp"

namespace spdagg {

inline constexpr std::uint32_t kFtsVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kFtsHeaderSize = 28;

/// Samples are stored as float32; values not representable in float32
/// are rounded on write.
std::vector<std::uint8_t> encode_fts(const FtsDataset& ds);
/// Throws ParseError (with byte offset) on any malformed input. Besides the
/// layout itself, requires N = H*W >= 2, labels < num_classes, and every
/// declared class to have at least one sample.
FtsDataset decode_fts(std::span<const std::uint8_t> bytes);

void fts_write(const FtsDataset& ds, const std::string& path);
FtsDataset fts_read(const std::string& path);

struct CheckpointBlock {
    std::string name;
    Matrix values;

    bool operator==(const CheckpointBlock&) const = default;
};

std::vector<std::uint8_t> encode_checkpoint(const std::vector<CheckpointBlock>& blocks);
std::vector<CheckpointBlock> decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Blocks: "pipeline" (1 x 8 config record), "mix.weights", "mix.bias"
/// (when the 1x1 conv is present), "transform.w", "dense.weights", "dense.bias".
std::vector<CheckpointBlock> checkpoint_blocks(const PipelineConfig& cfg, const NetworkParams& params);

struct Checkpoint {
    PipelineConfig pipeline;
    NetworkParams params;
};

Checkpoint checkpoint_from_blocks(const std::vector<CheckpointBlock>& blocks);

void checkpoint_write(const PipelineConfig& cfg, const NetworkParams& params, const std::string& path);
Checkpoint checkpoint_read(const std::string& path);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace spdagg
