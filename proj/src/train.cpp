#include "spdagg/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "spdagg/errors.hpp"

namespace spdagg {

void TrainConfig::validate() const {
    if (!(lr_stage1 >= 0.0) || !(lr_stage2 >= 0.0) || (lr_stiefel && !(*lr_stiefel >= 0.0))) {
        throw ContractError("TrainConfig: learning rates must be non-negative");
    }
    if (!(decay_factor >= 1.0)) throw ContractError("TrainConfig: decay_factor must be >= 1");
    if (batch_size < 1) throw ContractError("TrainConfig: batch_size must be >= 1");
    if (plateau_patience < 1) throw ContractError("TrainConfig: plateau_patience must be >= 1");
}

namespace {

void sgd(std::span<double> param, std::span<const double> grad, double lr) {
    for (std::size_t i = 0; i < param.size(); ++i) param[i] -= lr * grad[i];
}

void check_dataset(const FtsDataset& ds, const PipelineConfig& cfg, const char* what) {
    ds.validate();
    if (ds.channels != cfg.in_channels) {
        throw ContractError(std::string(what) + " has " + std::to_string(ds.channels) +
                            " channels, pipeline expects " + std::to_string(cfg.in_channels));
    }
    if (ds.num_classes > cfg.num_classes) {
        throw ContractError(std::string(what) + " has more classes than the pipeline");
    }
}

}  // namespace

TrainResult train(const FtsDataset& train_set, const FtsDataset* test_set, const PipelineConfig& cfg,
                  const TrainConfig& tc, const TrainHooks& hooks) {
    cfg.validate();
    tc.validate();
    if (train_set.size() == 0) throw ContractError("train: empty dataset");
    check_dataset(train_set, cfg, "training set");
    if (test_set) check_dataset(*test_set, cfg, "test set");

    RandomStream rng(tc.seed);
    TrainResult result;
    result.params = hooks.initial ? *hooks.initial : init_params(cfg, rng);
    NetworkParams& params = result.params;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::size_t epoch = 0;
    for (int stage = 1; stage <= 2; ++stage) {
        double lr = stage == 1 ? tc.lr_stage1 : tc.lr_stage2;
        double lr_w = lr;
        if (tc.lr_stiefel) {
            lr_w = stage == 1 ? *tc.lr_stiefel
                              : (tc.lr_stage1 > 0.0 ? *tc.lr_stiefel * tc.lr_stage2 / tc.lr_stage1 : 0.0);
        }
        const bool train_mix = cfg.mixed_channels > 0 && (stage == 2 || tc.train_mix_in_stage1);
        double best_loss = std::numeric_limits<double>::infinity();
        std::size_t stale_epochs = 0;

        for (std::size_t e = 0; e < tc.epochs_per_stage; ++e) {
            const auto started = std::chrono::steady_clock::now();
            ++epoch;
            rng.shuffle(order);

            double loss_sum = 0.0;
            std::size_t correct = 0;
            for (std::size_t begin = 0; begin < order.size(); begin += tc.batch_size) {
                const std::size_t end = std::min(order.size(), begin + tc.batch_size);
                const double inv_batch = 1.0 / static_cast<double>(end - begin);
                Gradients acc = zero_gradients(cfg, params);
                for (std::size_t b = begin; b < end; ++b) {
                    const std::size_t idx = order[b];
                    ForwardResult fr = forward(cfg, params, train_set.samples[idx], train_set.labels[idx]);
                    if (!std::isfinite(fr.loss)) {
                        const std::string where = first_non_finite(fr.tape);
                        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                                 ", sample " + std::to_string(idx) +
                                                 "; first non-finite tensor: " +
                                                 (where.empty() ? "loss" : where));
                    }
                    loss_sum += fr.loss;
                    if (fr.prediction == train_set.labels[idx]) ++correct;
                    accumulate(acc, backward(cfg, params, fr.tape), inv_batch);
                }

                if (lr > 0.0) {
                    sgd(params.dense.weights.data(), acc.dense_weights.data(), lr);
                    sgd(params.dense.bias, acc.dense_bias, lr);
                    if (train_mix) {
                        sgd(params.mix.weights.data(), acc.mix_weights.data(), lr);
                        sgd(params.mix.bias, acc.mix_bias, lr);
                    }
                }
                if (!tc.freeze_transform && lr_w > 0.0) {
                    params.transform = retract_step(params.transform, acc.transform_tangent, lr_w);
                }
                ++result.optimizer_steps;
                if (result.optimizer_steps % kRetightenInterval == 0) {
                    params.transform = retighten(params.transform);
                }
                const double ortho = params.transform.orthogonality_error();
                result.max_orthogonality_error = std::max(result.max_orthogonality_error, ortho);
                if (!(ortho < StiefelPoint::kTolerance)) {
                    throw std::runtime_error("train: transform parameter left the Stiefel manifold (" +
                                             std::to_string(ortho) + ")");
                }
                if (hooks.on_step) hooks.on_step(params);
            }

            EpochMetrics m;
            m.epoch = epoch;
            m.stage = stage;
            m.mean_train_loss = loss_sum / static_cast<double>(order.size());
            m.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
            if (test_set) m.test_accuracy = evaluate(cfg, params, *test_set).accuracy;
            m.lr = lr;
            m.stiefel_orthogonality_error = params.transform.orthogonality_error();
            m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
                            .count();
            result.history.push_back(m);
            if (hooks.on_epoch) hooks.on_epoch(m);

            // Plateau: no improvement by kPlateauThreshold for plateau_patience epochs.
            if (m.mean_train_loss < best_loss - kPlateauThreshold) {
                best_loss = m.mean_train_loss;
                stale_epochs = 0;
            } else if (++stale_epochs >= tc.plateau_patience) {
                lr /= tc.decay_factor;
                lr_w /= tc.decay_factor;
                stale_epochs = 0;
            }
        }
    }
    return result;
}

EvalResult evaluate(const PipelineConfig& cfg, const NetworkParams& params, const FtsDataset& ds) {
    ds.validate();
    EvalResult r;
    r.samples = ds.size();
    if (ds.size() == 0) return r;
    std::size_t correct = 0;
    double loss = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const ForwardResult fr = forward(cfg, params, ds.samples[i], ds.labels[i]);
        loss += fr.loss;
        if (fr.prediction == ds.labels[i]) ++correct;
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
    r.mean_loss = loss / static_cast<double>(ds.size());
    return r;
}

}  // namespace spdagg
