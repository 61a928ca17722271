#include "spdagg/network.hpp"

#include <cmath>

#include "spdagg/dataset.hpp"
#include "spdagg/errors.hpp"

namespace spdagg {

std::string to_string(Aggregator a) { return a == Aggregator::kernel ? "kernel" : "covariance"; }

Aggregator aggregator_from_string(const std::string& s) {
    if (s == "kernel") return Aggregator::kernel;
    if (s == "covariance") return Aggregator::covariance;
    throw ContractError("unknown aggregator '" + s + "' (expected kernel or covariance)");
}

void PipelineConfig::validate() const {
    if (in_channels < 1 || transform_dim < 1 || num_classes < 1) {
        throw ContractError("PipelineConfig: in_channels, transform_dim and num_classes must be >= 1");
    }
    if (transform_dim > aggregated_channels()) {
        throw ContractError("PipelineConfig: transform_dim " + std::to_string(transform_dim) +
                            " exceeds aggregated channels " + std::to_string(aggregated_channels()));
    }
    if (aggregator == Aggregator::kernel && aggregated_channels() < 2) {
        throw ContractError("PipelineConfig: kernel aggregation needs at least 2 channels");
    }
}

void FtsDataset::validate() const {
    if (samples.size() != labels.size()) {
        throw ContractError("dataset: " + std::to_string(samples.size()) + " samples but " +
                            std::to_string(labels.size()) + " labels");
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.channels() != channels || s.height() != height || s.width() != width) {
            throw ContractError("dataset: sample " + std::to_string(i) + " does not match manifest shape");
        }
        if (labels[i] >= num_classes) {
            throw ContractError("dataset: label " + std::to_string(labels[i]) + " of sample " +
                                std::to_string(i) + " >= num_classes " + std::to_string(num_classes));
        }
    }
}

FtsDataset slice(const FtsDataset& ds, std::size_t begin, std::size_t end) {
    if (begin > end || end > ds.size()) throw ContractError("slice: range out of bounds");
    FtsDataset out{ds.channels, ds.height, ds.width, ds.num_classes, {}, {}};
    out.samples.assign(ds.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                       ds.samples.begin() + static_cast<std::ptrdiff_t>(end));
    out.labels.assign(ds.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                      ds.labels.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
}

MixTape mix_forward(const Matrix& x, const MixParams& p) {
    if (x.rows() != p.weights.cols()) {
        throw ContractError("mix_forward: input has " + std::to_string(x.rows()) +
                            " channels, weights are " + p.weights.shape_string());
    }
    if (p.bias.size() != p.weights.rows()) throw ContractError("mix_forward: bias length mismatch");
    Matrix out = matmul(p.weights, x);
    for (std::size_t c = 0; c < out.rows(); ++c) {
        for (double& v : out.row(c)) {
            v += p.bias[c];
            if (!(v > 0.0)) v = 0.0;
        }
    }
    return MixTape{x, std::move(out)};
}

MixTape mix_forward(const FeatureTensor& x, const MixParams& p) { return mix_forward(x.as_matrix(), p); }

MixGrads mix_backward(const MixTape& tape, const MixParams& p, const Matrix& grad_out) {
    if (grad_out.rows() != tape.output.rows() || grad_out.cols() != tape.output.cols()) {
        throw ContractError("mix_backward: grad " + grad_out.shape_string() + " vs output " +
                            tape.output.shape_string());
    }
    // ReLU mask: output > 0 exactly where the pre-activation was positive.
    Matrix g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!(tape.output.data()[i] > 0.0)) g.data()[i] = 0.0;

    MixGrads out;
    out.weights = matmul(g, transpose(tape.input));
    out.bias.assign(g.rows(), 0.0);
    for (std::size_t c = 0; c < g.rows(); ++c)
        for (double v : g.row(c)) out.bias[c] += v;
    out.input = matmul(transpose(p.weights), g);
    return out;
}

bool NetworkParams::operator==(const NetworkParams& other) const {
    return mix.weights == other.mix.weights && mix.bias == other.mix.bias &&
           transform == other.transform && dense.weights == other.dense.weights &&
           dense.bias == other.dense.bias;
}

NetworkParams init_params(const PipelineConfig& cfg, RandomStream& rng) {
    cfg.validate();
    NetworkParams p;
    if (cfg.mixed_channels > 0) {
        // He initialisation for the ReLU layer.
        p.mix.weights = rng.normal_matrix(cfg.mixed_channels, cfg.in_channels,
                                          std::sqrt(2.0 / static_cast<double>(cfg.in_channels)));
        p.mix.bias.assign(cfg.mixed_channels, 0.0);
    }
    p.transform = stiefel_init(cfg.aggregated_channels(), cfg.transform_dim, rng);
    p.dense.weights = rng.normal_matrix(cfg.num_classes, cfg.head_size(), 0.01);
    p.dense.bias.assign(cfg.num_classes, 0.0);
    return p;
}

ForwardResult forward(const PipelineConfig& cfg, const NetworkParams& params, const FeatureTensor& x,
                      std::size_t label, const ForwardOptions& options) {
    if (x.channels() != cfg.in_channels) {
        throw ContractError("forward: input has " + std::to_string(x.channels()) +
                            " channels, pipeline expects " + std::to_string(cfg.in_channels));
    }
    if (params.transform.rows() != cfg.aggregated_channels() ||
        params.transform.cols() != cfg.transform_dim) {
        throw ContractError("forward: transform parameter " + params.transform.matrix().shape_string() +
                            " does not match pipeline");
    }

    ForwardTape t;
    t.label = label;
    t.input = x.as_matrix();
    if (cfg.mixed_channels > 0) {
        t.mix = mix_forward(t.input, params.mix);
        t.aggregated_features = t.mix->output;
    } else {
        t.aggregated_features = t.input;
    }

    SpdMatrix aggregated;
    if (cfg.aggregator == Aggregator::kernel) {
        t.kernel = kernel_forward(t.aggregated_features, options.sigma_override);
        aggregated = t.kernel.kernel;
    } else {
        aggregated = SpdMatrix(covariance_forward(t.aggregated_features));
    }

    t.transform = transform_forward(aggregated, params.transform);
    t.activated = cfg.use_spd_relu ? spd_relu(t.transform.output) : t.transform.output.matrix();
    t.vectorized = vectorize(t.activated);

    HeadVector v = t.vectorized;
    if (cfg.normalizations.power) {
        t.power = power_normalize(v);
        v = t.power->output;
    }
    if (cfg.normalizations.l2) {
        t.l2 = l2_normalize(v);
        v = t.l2->output;
    }
    t.head = std::move(v);
    t.loss = dense_softmax_ce(t.head, params.dense, label);

    ForwardResult r;
    r.loss = t.loss.loss;
    r.prediction = t.loss.prediction;
    r.tape = std::move(t);
    return r;
}

std::string first_non_finite(const ForwardTape& t) {
    if (!all_finite(t.input.data())) return "input";
    if (t.mix && !all_finite(t.mix->output.data())) return "mix output";
    if (!t.kernel.features.empty() && !all_finite(t.kernel.kernel.matrix().data())) return "kernel matrix";
    if (!all_finite(t.transform.input.matrix().data())) return "aggregated SPD matrix";
    if (!all_finite(t.transform.output.matrix().data())) return "transform output";
    if (!all_finite(t.vectorized)) return "vectorized head";
    if (t.power && !all_finite(t.power->output)) return "power-normalized head";
    if (t.l2 && !all_finite(t.l2->output)) return "l2-normalized head";
    if (!all_finite(t.loss.logits)) return "logits";
    if (!std::isfinite(t.loss.loss)) return "loss";
    return {};
}

Gradients backward(const PipelineConfig& cfg, const NetworkParams& params, const ForwardTape& t,
                   double upstream) {
    if (!(t.transform.w == params.transform)) {
        throw ContractError("backward: tape was recorded with a different transform parameter");
    }
    if (t.input.rows() != cfg.in_channels || t.transform.w.cols() != cfg.transform_dim ||
        t.loss.logits.size() != cfg.num_classes || t.mix.has_value() != (cfg.mixed_channels > 0)) {
        throw ContractError("backward: tape does not match pipeline configuration");
    }

    Gradients g;
    const DenseGrads& dense = t.loss.grads;
    g.dense_weights = scale(dense.weights, upstream);
    g.dense_bias = dense.bias;
    for (double& b : g.dense_bias) b *= upstream;

    HeadVector gv = dense.input;
    for (double& v : gv) v *= upstream;
    if (t.l2) gv = l2_normalize_backward(*t.l2, gv);
    if (t.power) gv = power_normalize_backward(*t.power, gv);

    Matrix grad_y = vectorize_backward(gv, cfg.transform_dim);
    if (cfg.use_spd_relu) grad_y = spd_relu_backward(t.transform.output, grad_y);

    g.transform_euclidean = transform_backward_param(t.transform, grad_y);
    g.transform_tangent = tangent_project(params.transform, g.transform_euclidean);
    const Matrix grad_k = transform_backward_input(t.transform, grad_y);

    const Matrix grad_features = cfg.aggregator == Aggregator::kernel
                                     ? kernel_backward(t.kernel, grad_k)
                                     : covariance_backward(t.aggregated_features, grad_k);

    if (t.mix) {
        MixGrads mg = mix_backward(*t.mix, params.mix, grad_features);
        g.mix_weights = std::move(mg.weights);
        g.mix_bias = std::move(mg.bias);
        g.input = std::move(mg.input);
    } else {
        g.input = grad_features;
    }
    return g;
}

Gradients zero_gradients(const PipelineConfig& cfg, const NetworkParams& params) {
    Gradients g;
    g.mix_weights = Matrix(params.mix.weights.rows(), params.mix.weights.cols());
    g.mix_bias.assign(params.mix.bias.size(), 0.0);
    g.transform_euclidean = Matrix(params.transform.rows(), params.transform.cols());
    g.transform_tangent = g.transform_euclidean;
    g.dense_weights = Matrix(params.dense.weights.rows(), params.dense.weights.cols());
    g.dense_bias.assign(params.dense.bias.size(), 0.0);
    g.input = Matrix(cfg.in_channels, 0);
    return g;
}

namespace {

void axpy(std::span<double> acc, std::span<const double> x, double s) {
    if (acc.size() != x.size()) throw ContractError("accumulate: gradient shape mismatch");
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += s * x[i];
}

}  // namespace

void accumulate(Gradients& acc, const Gradients& g, double s) {
    axpy(acc.mix_weights.data(), g.mix_weights.data(), s);
    axpy(acc.mix_bias, g.mix_bias, s);
    axpy(acc.transform_euclidean.data(), g.transform_euclidean.data(), s);
    axpy(acc.transform_tangent.data(), g.transform_tangent.data(), s);
    axpy(acc.dense_weights.data(), g.dense_weights.data(), s);
    axpy(acc.dense_bias, g.dense_bias, s);
}

}  // namespace spdagg
