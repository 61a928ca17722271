#include "spdagg/spd_transform.hpp"

#include "spdagg/errors.hpp"
#include "spdagg/linalg.hpp"

namespace spdagg {

StiefelPoint::StiefelPoint(Matrix w) : w_(std::move(w)) {
    if (w_.rows() < w_.cols() || w_.cols() == 0) {
        throw ContractError("StiefelPoint: need rows >= cols >= 1, got " + w_.shape_string());
    }
    const double err = spdagg::orthogonality_error(w_);
    if (!(err < kTolerance)) {
        throw ContractError("StiefelPoint: ||W^T W - I||_F = " + std::to_string(err) +
                            " exceeds tolerance");
    }
}

StiefelPoint StiefelPoint::unchecked(Matrix w) { return StiefelPoint(std::move(w), Unchecked{}); }

StiefelPoint stiefel_init(std::size_t c, std::size_t c_prime, RandomStream& rng) {
    if (c_prime < 1 || c < c_prime) {
        throw ContractError("stiefel_init: need c >= c_prime >= 1, got c=" + std::to_string(c) +
                            " c_prime=" + std::to_string(c_prime));
    }
    return StiefelPoint(qr_reduced(rng.normal_matrix(c, c_prime)).q);
}

TransformTape transform_forward(const SpdMatrix& k, const StiefelPoint& w) {
    if (k.dim() != w.rows()) {
        throw ContractError("transform_forward: K is " + k.matrix().shape_string() + " but W is " +
                            w.matrix().shape_string());
    }
    const Matrix& wm = w.matrix();
    const Matrix y = matmul(matmul(transpose(wm), k.matrix()), wm);
    return TransformTape{k, w, SpdMatrix(y)};
}

namespace {

void check_grad_y(const TransformTape& tape, const Matrix& grad_y, const char* op) {
    const std::size_t cp = tape.w.cols();
    if (grad_y.rows() != cp || grad_y.cols() != cp) {
        throw ContractError(std::string(op) + ": grad_y " + grad_y.shape_string() +
                            " but output is " + tape.output.matrix().shape_string());
    }
}

}  // namespace

Matrix transform_backward_input(const TransformTape& tape, const Matrix& grad_y) {
    check_grad_y(tape, grad_y, "transform_backward_input");
    const Matrix& w = tape.w.matrix();
    return matmul(matmul(w, grad_y), transpose(w));
}

Matrix transform_backward_param(const TransformTape& tape, const Matrix& grad_y) {
    check_grad_y(tape, grad_y, "transform_backward_param");
    const Matrix& w = tape.w.matrix();
    const Matrix& k = tape.input.matrix();
    return add(matmul(matmul(transpose(k), w), grad_y), matmul(matmul(k, w), transpose(grad_y)));
}

Matrix tangent_project(const StiefelPoint& w, const Matrix& euclid_grad) {
    const Matrix& wm = w.matrix();
    if (euclid_grad.rows() != wm.rows() || euclid_grad.cols() != wm.cols()) {
        throw ContractError("tangent_project: gradient " + euclid_grad.shape_string() +
                            " vs point " + wm.shape_string());
    }
    return subtract(euclid_grad, matmul(matmul(wm, transpose(euclid_grad)), wm));
}

StiefelPoint retract_step(const StiefelPoint& w, const Matrix& manifold_grad, double lr) {
    if (!(lr > 0.0)) throw ContractError("retract_step: learning rate must be positive");
    if (manifold_grad.rows() != w.rows() || manifold_grad.cols() != w.cols()) {
        throw ContractError("retract_step: gradient " + manifold_grad.shape_string() +
                            " vs point " + w.matrix().shape_string());
    }
    return StiefelPoint(qr_reduced(subtract(w.matrix(), scale(manifold_grad, lr))).q);
}

StiefelPoint retighten(const StiefelPoint& w) { return StiefelPoint(qr_reduced(w.matrix()).q); }

Matrix spd_relu(const SpdMatrix& y) {
    Matrix z = y.matrix();
    for (double& v : z.data()) v = v > 0.0 ? v : 0.0;
    return z;
}

Matrix spd_relu_backward(const SpdMatrix& y, const Matrix& grad_z) {
    const Matrix& ym = y.matrix();
    if (grad_z.rows() != ym.rows() || grad_z.cols() != ym.cols()) {
        throw ContractError("spd_relu_backward: grad " + grad_z.shape_string() + " vs input " +
                            ym.shape_string());
    }
    Matrix g = grad_z;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!(ym.data()[i] > 0.0)) g.data()[i] = 0.0;
    return g;
}

}  // namespace spdagg
