#include "spdagg/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "spdagg/errors.hpp"

namespace spdagg {

bool GradCheckReport::pass() const {
    return std::all_of(blocks.begin(), blocks.end(), [](const BlockReport& b) { return b.pass; });
}

PipelineConfig grad_check_default_config() {
    PipelineConfig cfg;
    cfg.in_channels = 6;
    cfg.mixed_channels = 5;
    cfg.transform_dim = 3;
    cfg.num_classes = 3;
    return cfg;
}

namespace {

constexpr std::size_t kMaxParameters = 5000;

}  // namespace

GradCheckReport grad_check(const PipelineConfig& cfg, std::uint64_t seed, double tolerance,
                           const GradCheckOptions& options) {
    cfg.validate();
    RandomStream rng(seed);
    NetworkParams params = init_params(cfg, rng);
    // Unit-scale head and a non-zero conv bias so that every block carries signal.
    params.dense.weights = rng.normal_matrix(cfg.num_classes, cfg.head_size());
    for (double& b : params.dense.bias) b = rng.normal();
    for (double& b : params.mix.bias) b = 0.1 * rng.normal();

    FeatureTensor x(cfg.in_channels, options.height, options.width);
    for (double& v : x.data()) v = rng.normal();
    const std::size_t label = rng.index(cfg.num_classes);

    const std::size_t total = params.mix.weights.size() + params.mix.bias.size() +
                              params.transform.matrix().size() + params.dense.weights.size() +
                              params.dense.bias.size() + x.data().size();
    if (total > kMaxParameters) {
        throw ContractError("grad_check: " + std::to_string(total) + " probed entries exceeds " +
                            std::to_string(kMaxParameters));
    }

    const ForwardResult base = forward(cfg, params, x, label);
    Gradients analytic = backward(cfg, params, base.tape);
    if (options.tamper) options.tamper(analytic);

    ForwardOptions frozen;
    if (cfg.aggregator == Aggregator::kernel) frozen.sigma_override = base.tape.kernel.sigma;

    auto loss_of = [&](const NetworkParams& p, const FeatureTensor& input) {
        return forward(cfg, p, input, label, frozen).loss;
    };
    const double h = options.step;

    GradCheckReport report;
    report.tolerance = tolerance;

    // `probe(i, delta)` applies delta to entry i of a working copy and
    // returns the loss; the copy is restored afterwards.
    auto check_block = [&](const std::string& name, std::span<const double> grad, std::size_t n,
                           const std::function<double(std::size_t, double)>& probe) {
        BlockReport b{name, n, 0.0, true};
        for (std::size_t i = 0; i < n; ++i) {
            const double numeric = (probe(i, h) - probe(i, -h)) / (2.0 * h);
            const double err = std::abs(grad[i] - numeric) / std::max(1.0, std::abs(grad[i]));
            b.max_rel_error = std::max(b.max_rel_error, err);
        }
        b.pass = b.max_rel_error < tolerance;
        report.blocks.push_back(b);
    };

    auto param_probe = [&](auto select) {
        return [&, select](std::size_t i, double delta) {
            NetworkParams p = params;
            select(p)[i] += delta;
            return loss_of(p, x);
        };
    };

    if (cfg.mixed_channels > 0) {
        check_block("mix.weights", analytic.mix_weights.data(), params.mix.weights.size(),
                    param_probe([](NetworkParams& p) { return p.mix.weights.data(); }));
        check_block("mix.bias", analytic.mix_bias, params.mix.bias.size(),
                    param_probe([](NetworkParams& p) { return std::span<double>(p.mix.bias); }));
    }
    check_block("transform.w", analytic.transform_euclidean.data(), params.transform.matrix().size(),
                [&](std::size_t i, double delta) {
                    NetworkParams p = params;
                    Matrix w = p.transform.matrix();
                    w.data()[i] += delta;
                    p.transform = StiefelPoint::unchecked(std::move(w));
                    return loss_of(p, x);
                });
    check_block("dense.weights", analytic.dense_weights.data(), params.dense.weights.size(),
                param_probe([](NetworkParams& p) { return p.dense.weights.data(); }));
    check_block("dense.bias", analytic.dense_bias, params.dense.bias.size(),
                param_probe([](NetworkParams& p) { return std::span<double>(p.dense.bias); }));
    check_block("input", analytic.input.data(), x.data().size(), [&](std::size_t i, double delta) {
        FeatureTensor xp = x;
        xp.data()[i] += delta;
        return loss_of(params, xp);
    });
    return report;
}

}  // namespace spdagg
