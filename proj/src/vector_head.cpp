#include "spdagg/vector_head.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spdagg/errors.hpp"

namespace spdagg {

HeadVector vectorize(const Matrix& y) {
    if (y.rows() != y.cols()) throw ContractError("vectorize: non-square " + y.shape_string());
    if (!is_symmetric(y, 1e-10 * std::max(1.0, max_abs(y)))) {
        throw ContractError("vectorize: input is not symmetric");
    }
    const std::size_t n = y.rows();
    HeadVector v;
    v.reserve(head_dim(n));
    for (std::size_t i = 0; i < n; ++i) {
        v.push_back(y(i, i));
        for (std::size_t j = i + 1; j < n; ++j) v.push_back(std::numbers::sqrt2 * y(i, j));
    }
    return v;
}

Matrix vectorize_backward(std::span<const double> grad_v, std::size_t c_prime) {
    if (grad_v.size() != head_dim(c_prime)) {
        throw ContractError("vectorize_backward: expected length " + std::to_string(head_dim(c_prime)) +
                            ", got " + std::to_string(grad_v.size()));
    }
    constexpr double half_sqrt2 = std::numbers::sqrt2 / 2.0;
    Matrix g(c_prime, c_prime);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < c_prime; ++i) {
        g(i, i) = grad_v[idx++];
        for (std::size_t j = i + 1; j < c_prime; ++j) {
            const double v = half_sqrt2 * grad_v[idx++];
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return g;
}

PowerNormResult power_normalize(std::span<const double> v) {
    PowerNormResult r{HeadVector(v.size()), HeadVector(v.begin(), v.end())};
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double s = std::sqrt(std::abs(v[i]));
        r.output[i] = v[i] < 0.0 ? -s : s;
    }
    return r;
}

HeadVector power_normalize_backward(const PowerNormResult& tape, std::span<const double> grad) {
    if (grad.size() != tape.input.size()) {
        throw ContractError("power_normalize_backward: length mismatch");
    }
    HeadVector g(grad.size());
    for (std::size_t i = 0; i < grad.size(); ++i) {
        g[i] = grad[i] / (2.0 * std::sqrt(std::max(std::abs(tape.input[i]), kPowerNormEpsilon)));
    }
    return g;
}

L2NormResult l2_normalize(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    L2NormResult r{HeadVector(v.begin(), v.end()), std::sqrt(s)};
    if (r.norm >= 1e-12) {
        for (double& x : r.output) x /= r.norm;
    }
    return r;
}

HeadVector l2_normalize_backward(const L2NormResult& tape, std::span<const double> grad) {
    if (grad.size() != tape.output.size()) throw ContractError("l2_normalize_backward: length mismatch");
    if (tape.norm < 1e-12) return HeadVector(grad.begin(), grad.end());
    // (I - u u^T) g / ||v||, u = output
    double dot = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) dot += tape.output[i] * grad[i];
    HeadVector g(grad.size());
    for (std::size_t i = 0; i < grad.size(); ++i) g[i] = (grad[i] - tape.output[i] * dot) / tape.norm;
    return g;
}

SoftmaxCeResult dense_softmax_ce(std::span<const double> v, const DenseParams& params,
                                 std::size_t label) {
    const std::size_t classes = params.weights.rows();
    if (params.weights.cols() != v.size() || params.bias.size() != classes) {
        throw ContractError("dense_softmax_ce: weights " + params.weights.shape_string() +
                            ", bias " + std::to_string(params.bias.size()) + ", input " +
                            std::to_string(v.size()));
    }
    if (label >= classes) {
        throw ContractError("dense_softmax_ce: label " + std::to_string(label) + " out of range for " +
                            std::to_string(classes) + " classes");
    }

    SoftmaxCeResult r;
    r.logits.resize(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        double z = params.bias[c];
        const auto w = params.weights.row(c);
        for (std::size_t i = 0; i < v.size(); ++i) z += w[i] * v[i];
        r.logits[c] = z;
    }
    const auto max_it = std::max_element(r.logits.begin(), r.logits.end());
    r.prediction = static_cast<std::size_t>(max_it - r.logits.begin());
    const double max_logit = *max_it;
    double sum = 0.0;
    for (double z : r.logits) sum += std::exp(z - max_logit);
    const double log_sum = std::log(sum);
    r.loss = -(r.logits[label] - max_logit - log_sum);

    r.probabilities.resize(classes);
    for (std::size_t c = 0; c < classes; ++c) r.probabilities[c] = std::exp(r.logits[c] - max_logit - log_sum);

    std::vector<double> dz = r.probabilities;
    dz[label] -= 1.0;
    r.grads.bias = dz;
    r.grads.weights = Matrix(classes, v.size());
    r.grads.input.assign(v.size(), 0.0);
    for (std::size_t c = 0; c < classes; ++c) {
        auto gw = r.grads.weights.row(c);
        const auto w = params.weights.row(c);
        for (std::size_t i = 0; i < v.size(); ++i) {
            gw[i] = dz[c] * v[i];
            r.grads.input[i] += dz[c] * w[i];
        }
    }
    return r;
}

}  // namespace spdagg
