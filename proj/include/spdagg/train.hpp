#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "spdagg/dataset.hpp"
#include "spdagg/network.hpp"

namespace spdagg {

struct TrainConfig {
    double lr_stage1 = 0.1;
    double lr_stage2 = 0.001;
    /// Stiefel step size at the start of stage 1. Unset: track the
    /// Euclidean rate. Set: scaled by lr_stage2 / lr_stage1 in stage 2 and
    /// decayed together with the Euclidean rate.
    std::optional<double> lr_stiefel;
    double decay_factor = 10.0;
    std::size_t plateau_patience = 3;
    std::size_t batch_size = 32;
    std::size_t epochs_per_stage = 15;
    std::uint64_t seed = 0;
    /// Keep the 1x1 conv trainable in stage 1 as well.
    bool train_mix_in_stage1 = false;
    /// Ablation: never update the transform parameter (fixed random W).
    bool freeze_transform = false;

    void validate() const;

    bool operator==(const TrainConfig&) const = default;
};

/// Minimum epoch-loss improvement that resets the plateau counter.
inline constexpr double kPlateauThreshold = 1e-4;
/// Optimizer steps between drift-correcting re-retractions of W.
inline constexpr std::size_t kRetightenInterval = 100;

struct EpochMetrics {
    std::size_t epoch = 0;  // 1-based, counted across both stages
    int stage = 1;
    double mean_train_loss = 0.0;
    double train_accuracy = 0.0;
    std::optional<double> test_accuracy;
    double lr = 0.0;
    double stiefel_orthogonality_error = 0.0;
    double wall_ms = 0.0;
};

struct TrainResult {
    NetworkParams params;
    std::vector<EpochMetrics> history;
    /// Largest ||W^T W - I||_F observed after any optimizer step.
    double max_orthogonality_error = 0.0;
    std::size_t optimizer_steps = 0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;
/// Called after each optimizer step with the current parameters.
using StepCallback = std::function<void(const NetworkParams&)>;

struct TrainHooks {
    EpochCallback on_epoch;
    StepCallback on_step;
    /// Start from these parameters instead of init_params(seed).
    std::optional<NetworkParams> initial;
};

/// Two-stage mini-batch SGD. Stage 1 freezes the 1x1 conv, stage 2 trains
/// everything. Euclidean parameters take plain SGD steps, the transform
/// parameter takes tangent projection + QR retraction.
TrainResult train(const FtsDataset& train_set, const FtsDataset* test_set, const PipelineConfig& cfg,
                  const TrainConfig& tc, const TrainHooks& hooks = {});

struct EvalResult {
    double accuracy = 0.0;
    double mean_loss = 0.0;
    std::size_t samples = 0;
};

EvalResult evaluate(const PipelineConfig& cfg, const NetworkParams& params, const FtsDataset& ds);

}  // namespace spdagg
