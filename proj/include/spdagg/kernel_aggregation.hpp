#pragma once

// Aggregation of a C x H x W_sp feature tensor into a C x C matrix.
//
// The kernel aggregator compares feature maps (rows of the reshaped
// C x N matrix M), not local features:
//
//     K_ij = exp(-||f_i - f_j||^2 / (2 sigma^2))
//
// with sigma the mean pairwise Euclidean distance between feature maps of
// the current sample. The Gaussian kernel on distinct points is strictly
// positive definite for any C and N, unlike the covariance descriptor,
// whose rank is at most min(C, N - 1).
//
// The forward pass uses the squared-distance expansion
//     D = 1 (M o M)^T + (M o M) 1^T - 2 M M^T
// with 1 the C x N all-ones matrix, then K = exp(-D / 2 sigma^2)
// elementwise.
//
// Backward treats sigma as a constant. The gradient w.r.t. feature map i is
//     dL/df_i = sum_j (G_ij + G_ji) K_ij (f_j - f_i) / sigma^2
// i.e. dL/dM = S M - diag(S 1) M with S = (G + G^T) o K / sigma^2.

#include <optional>

#include "spdagg/matrix.hpp"

namespace spdagg {

/// Symmetric matrix intended to be positive definite. Construction makes
/// it bit-exactly symmetric; definiteness is checked by certify().
class SpdMatrix {
public:
    SpdMatrix() = default;
    explicit SpdMatrix(const Matrix& m);

    std::size_t dim() const noexcept { return data_.rows(); }
    const Matrix& matrix() const noexcept { return data_; }

    bool operator==(const SpdMatrix& other) const = default;

private:
    Matrix data_;
};

inline constexpr double kSigmaFloor = 1e-12;

struct KernelTape {
    Matrix features;  // M, C x N
    SpdMatrix kernel;
    double sigma = 0.0;
};

/// Mean Euclidean distance over unordered pairs of rows, floored at 1e-12.
double compute_sigma(const Matrix& features);

/// `sigma_override` replaces the per-sample bandwidth (used to freeze sigma
/// during finite-difference probing).
KernelTape kernel_forward(const Matrix& features, std::optional<double> sigma_override = {});
KernelTape kernel_forward(const FeatureTensor& x, std::optional<double> sigma_override = {});

/// dL/dM for upstream dL/dK.
Matrix kernel_backward(const KernelTape& tape, const Matrix& grad_k);

/// Sample covariance of the N local features, 1/(N-1) normalization.
Matrix covariance_forward(const Matrix& features);
Matrix covariance_forward(const FeatureTensor& x);

/// dL/dM for upstream dL/dCov.
Matrix covariance_backward(const Matrix& features, const Matrix& grad_cov);

/// Smallest eigenvalue of k; > 0 certifies positive definiteness.
double certify(const SpdMatrix& k);

}  // namespace spdagg
