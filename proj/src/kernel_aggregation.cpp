#include "spdagg/kernel_aggregation.hpp"

#include <algorithm>
#include <cmath>

#include "spdagg/errors.hpp"
#include "spdagg/linalg.hpp"

namespace spdagg {

SpdMatrix::SpdMatrix(const Matrix& m) : data_(symmetrize(m)) {}

double compute_sigma(const Matrix& features) {
    const std::size_t c = features.rows();
    if (c < 2) throw ContractError("compute_sigma: need at least 2 feature maps, got " +
                                   std::to_string(c));
    double total = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = i + 1; j < c; ++j) {
            double d2 = 0.0;
            for (std::size_t n = 0; n < features.cols(); ++n) {
                const double d = features(i, n) - features(j, n);
                d2 += d * d;
            }
            total += std::sqrt(d2);
        }
    }
    const double pairs = static_cast<double>(c * (c - 1) / 2);
    return std::max(total / pairs, kSigmaFloor);
}

KernelTape kernel_forward(const Matrix& features, std::optional<double> sigma_override) {
    const std::size_t c = features.rows();
    const std::size_t n = features.cols();
    if (c < 2 || n < 2) {
        throw ContractError("kernel_forward: need C >= 2 and N >= 2, got " + features.shape_string());
    }
    if (!all_finite(features.data())) throw ContractError("kernel_forward: non-finite input");
    const double sigma = sigma_override ? *sigma_override : compute_sigma(features);
    if (!(sigma > 0.0)) throw ContractError("kernel_forward: sigma must be positive");

    const Matrix squared = hadamard(features, features);
    const Matrix ones = Matrix::ones(c, n);
    const Matrix k1 = matmul(ones, transpose(squared));  // ||f_j||^2
    const Matrix k2 = matmul(squared, transpose(ones));  // ||f_i||^2
    const Matrix k3 = matmul(features, transpose(features));

    const double inv = -1.0 / (2.0 * sigma * sigma);
    Matrix k(c, c);
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const double dist2 = std::max(0.0, k1(i, j) + k2(i, j) - 2.0 * k3(i, j));
            k(i, j) = std::exp(dist2 * inv);
        }
    }
    return KernelTape{features, SpdMatrix(k), sigma};
}

KernelTape kernel_forward(const FeatureTensor& x, std::optional<double> sigma_override) {
    return kernel_forward(x.as_matrix(), sigma_override);
}

Matrix kernel_backward(const KernelTape& tape, const Matrix& grad_k) {
    const Matrix& k = tape.kernel.matrix();
    if (grad_k.rows() != k.rows() || grad_k.cols() != k.cols()) {
        throw ContractError("kernel_backward: grad " + grad_k.shape_string() + " vs kernel " +
                            k.shape_string());
    }
    const std::size_t c = k.rows();
    const double inv_sigma2 = 1.0 / (tape.sigma * tape.sigma);
    Matrix s(c, c);
    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < c; ++j) s(i, j) = (grad_k(i, j) + grad_k(j, i)) * k(i, j) * inv_sigma2;

    Matrix grad = matmul(s, tape.features);
    for (std::size_t i = 0; i < c; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) row_sum += s(i, j);
        auto g = grad.row(i);
        const auto f = tape.features.row(i);
        for (std::size_t col = 0; col < g.size(); ++col) g[col] -= row_sum * f[col];
    }
    return grad;
}

namespace {

Matrix centered(const Matrix& features) {
    Matrix out = features;
    const double inv_n = 1.0 / static_cast<double>(features.cols());
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        double mean = 0.0;
        for (double v : r) mean += v;
        mean *= inv_n;
        for (double& v : r) v -= mean;
    }
    return out;
}

}  // namespace

Matrix covariance_forward(const Matrix& features) {
    const std::size_t n = features.cols();
    if (n < 2) throw ContractError("covariance_forward: need N >= 2 local features, got " +
                                   std::to_string(n));
    const Matrix c = centered(features);
    return symmetrize(scale(matmul(c, transpose(c)), 1.0 / static_cast<double>(n - 1)));
}

Matrix covariance_forward(const FeatureTensor& x) { return covariance_forward(x.as_matrix()); }

Matrix covariance_backward(const Matrix& features, const Matrix& grad_cov) {
    const std::size_t c = features.rows();
    if (grad_cov.rows() != c || grad_cov.cols() != c) {
        throw ContractError("covariance_backward: grad " + grad_cov.shape_string() +
                            " vs features " + features.shape_string());
    }
    const std::size_t n = features.cols();
    // Rows of the centered matrix sum to zero, so the centering Jacobian
    // leaves (G + G^T) Mc / (N-1) unchanged.
    const Matrix g = add(grad_cov, transpose(grad_cov));
    return scale(matmul(g, centered(features)), 1.0 / static_cast<double>(n - 1));
}

double certify(const SpdMatrix& k) { return min_eigenvalue(k.matrix()); }

}  // namespace spdagg
