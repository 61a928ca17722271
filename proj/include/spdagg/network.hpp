#pragma once

// The full pipeline, per sample:
//
//   x (C0 x H x W) -> 1x1 conv + ReLU -> kernel (or covariance) aggregation
//     -> Y = W^T K W -> [ReLU] -> vectorize -> [power] -> [l2]
//     -> dense -> softmax cross-entropy

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spdagg/kernel_aggregation.hpp"
#include "spdagg/matrix.hpp"
#include "spdagg/random.hpp"
#include "spdagg/spd_transform.hpp"
#include "spdagg/vector_head.hpp"

namespace spdagg {

enum class Aggregator { kernel, covariance };

std::string to_string(Aggregator a);
Aggregator aggregator_from_string(const std::string& s);

struct Normalizations {
    bool power = true;
    bool l2 = true;

    bool operator==(const Normalizations&) const = default;
};

struct PipelineConfig {
    std::size_t in_channels = 16;
    std::size_t mixed_channels = 12;  // 0 skips the 1x1 conv
    std::size_t transform_dim = 8;
    std::size_t num_classes = 2;
    bool use_spd_relu = false;
    Aggregator aggregator = Aggregator::kernel;
    Normalizations normalizations;

    /// Channels reaching the aggregator.
    std::size_t aggregated_channels() const noexcept {
        return mixed_channels == 0 ? in_channels : mixed_channels;
    }
    std::size_t head_size() const noexcept { return head_dim(transform_dim); }

    void validate() const;

    bool operator==(const PipelineConfig&) const = default;
};

/// 1x1 convolution: a per-position channel-mixing affine map.
struct MixParams {
    Matrix weights;            // C x C0
    std::vector<double> bias;  // C
};

struct MixTape {
    Matrix input;   // C0 x N
    Matrix output;  // C x N, after ReLU
};

struct MixGrads {
    Matrix weights;
    std::vector<double> bias;
    Matrix input;
};

/// out = max(0, weights * x + bias 1^T), x given as C0 x N.
MixTape mix_forward(const Matrix& x, const MixParams& p);
MixTape mix_forward(const FeatureTensor& x, const MixParams& p);
MixGrads mix_backward(const MixTape& tape, const MixParams& p, const Matrix& grad_out);

struct NetworkParams {
    MixParams mix;  // empty when mixed_channels == 0
    StiefelPoint transform;
    DenseParams dense;

    bool operator==(const NetworkParams& other) const;
};

NetworkParams init_params(const PipelineConfig& cfg, RandomStream& rng);

struct ForwardOptions {
    /// Fixed kernel bandwidth instead of the per-sample mean distance.
    std::optional<double> sigma_override;
};

struct ForwardTape {
    std::size_t label = 0;
    Matrix input;                    // C0 x N
    std::optional<MixTape> mix;
    Matrix aggregated_features;      // input to the aggregator
    KernelTape kernel;               // kernel aggregator only
    TransformTape transform;
    Matrix activated;                // Y, or relu(Y)
    HeadVector vectorized;
    std::optional<PowerNormResult> power;
    std::optional<L2NormResult> l2;
    HeadVector head;                 // dense layer input
    SoftmaxCeResult loss;
};

struct ForwardResult {
    double loss = 0.0;
    std::size_t prediction = 0;
    ForwardTape tape;
};

ForwardResult forward(const PipelineConfig& cfg, const NetworkParams& params, const FeatureTensor& x,
                      std::size_t label, const ForwardOptions& options = {});

/// Name of the first tensor in the tape holding a NaN/Inf, or empty.
std::string first_non_finite(const ForwardTape& tape);

struct Gradients {
    Matrix mix_weights;
    std::vector<double> mix_bias;
    Matrix transform_euclidean;  // raw dL/dW
    Matrix transform_tangent;    // projected onto the tangent space at W
    Matrix dense_weights;
    std::vector<double> dense_bias;
    Matrix input;                // dL/dx as C0 x N
};

/// Gradients of upstream * loss. upstream = 0 yields all zeros.
Gradients backward(const PipelineConfig& cfg, const NetworkParams& params, const ForwardTape& tape,
                   double upstream = 1.0);

/// Zero-filled gradients shaped like params.
Gradients zero_gradients(const PipelineConfig& cfg, const NetworkParams& params);
/// acc += scale * g, in a fixed element order.
void accumulate(Gradients& acc, const Gradients& g, double scale);

}  // namespace spdagg
