#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spdagg/matrix.hpp"

namespace spdagg {

using HeadVector = std::vector<double>;

inline constexpr std::size_t head_dim(std::size_t c_prime) { return c_prime * (c_prime + 1) / 2; }

/// Row-major upper triangle of a symmetric matrix, off-diagonal entries
/// scaled by sqrt(2) so that ||v||_2 == ||Y||_F.
HeadVector vectorize(const Matrix& y);

/// Adjoint of vectorize restricted to symmetric matrices: diagonal slots
/// receive the matching grad entry, each off-diagonal slot receives
/// grad / sqrt(2).
Matrix vectorize_backward(std::span<const double> grad_v, std::size_t c_prime);

inline constexpr double kPowerNormEpsilon = 1e-8;

struct PowerNormResult {
    HeadVector output;
    HeadVector input;  // tape
};

/// sign(v) * sqrt(|v|)
PowerNormResult power_normalize(std::span<const double> v);
HeadVector power_normalize_backward(const PowerNormResult& tape, std::span<const double> grad);

struct L2NormResult {
    HeadVector output;
    double norm = 0.0;  // tape, ||input||_2
};

/// v / ||v||_2; identity when ||v||_2 < 1e-12.
L2NormResult l2_normalize(std::span<const double> v);
HeadVector l2_normalize_backward(const L2NormResult& tape, std::span<const double> grad);

struct DenseParams {
    Matrix weights;             // num_classes x head_dim
    std::vector<double> bias;   // num_classes
};

struct DenseGrads {
    HeadVector input;
    Matrix weights;
    std::vector<double> bias;
};

struct SoftmaxCeResult {
    double loss = 0.0;
    std::size_t prediction = 0;
    std::vector<double> logits;
    std::vector<double> probabilities;
    DenseGrads grads;
};

/// logits = W v + b, loss = -log softmax(logits)[label].
SoftmaxCeResult dense_softmax_ce(std::span<const double> v, const DenseParams& params,
                                 std::size_t label);

}  // namespace spdagg
