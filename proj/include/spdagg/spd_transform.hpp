#pragma once

#include "spdagg/kernel_aggregation.hpp"
#include "spdagg/matrix.hpp"
#include "spdagg/random.hpp"

namespace spdagg {

/// C x C' matrix with orthonormal columns (a point on St(C', C)).
class StiefelPoint {
public:
    static constexpr double kTolerance = 1e-8;

    StiefelPoint() = default;
    /// Throws ContractError unless ||w^T w - I||_F < kTolerance.
    explicit StiefelPoint(Matrix w);

    /// Skips the orthogonality check. Only for finite-difference probing,
    /// where entries are perturbed off the manifold on purpose.
    static StiefelPoint unchecked(Matrix w);

    const Matrix& matrix() const noexcept { return w_; }
    std::size_t rows() const noexcept { return w_.rows(); }
    std::size_t cols() const noexcept { return w_.cols(); }
    double orthogonality_error() const { return spdagg::orthogonality_error(w_); }

    bool operator==(const StiefelPoint& other) const = default;

private:
    struct Unchecked {};
    StiefelPoint(Matrix w, Unchecked) : w_(std::move(w)) {}

    Matrix w_;
};

StiefelPoint stiefel_init(std::size_t c, std::size_t c_prime, RandomStream& rng);

struct TransformTape {
    SpdMatrix input;
    StiefelPoint w;
    SpdMatrix output;
};

/// Y = W^T K W.
TransformTape transform_forward(const SpdMatrix& k, const StiefelPoint& w);

/// dL/dK = W (dL/dY) W^T.
Matrix transform_backward_input(const TransformTape& tape, const Matrix& grad_y);

/// Euclidean dL/dW = K^T W G + K W G^T, before projection to the tangent space.
Matrix transform_backward_param(const TransformTape& tape, const Matrix& grad_y);

/// G - W G^T W. The result D satisfies W^T D + D^T W = 0.
Matrix tangent_project(const StiefelPoint& w, const Matrix& euclid_grad);

/// q(W - lr * grad), q = Q factor of the positive-diagonal reduced QR.
StiefelPoint retract_step(const StiefelPoint& w, const Matrix& manifold_grad, double lr);

/// q(W) with no step. Pulls accumulated rounding drift back to ~1e-15.
StiefelPoint retighten(const StiefelPoint& w);

/// Elementwise max(0, y). Symmetric with the diagonal untouched; returned
/// as a plain Matrix since definiteness is audited, not guaranteed here.
Matrix spd_relu(const SpdMatrix& y);
/// Mask backward: passes grad where y > 0, zero elsewhere (including y == 0).
Matrix spd_relu_backward(const SpdMatrix& y, const Matrix& grad_z);

}  // namespace spdagg
