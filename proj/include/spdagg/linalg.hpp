#pragma once

#include <vector>

#include "spdagg/matrix.hpp"

namespace spdagg {

struct QrFactors {
    Matrix q;  // n x p, q^T q = I
    Matrix r;  // p x p, upper triangular with positive diagonal
};

/// Householder reduced QR of an n x p matrix (n >= p). Columns of q are
/// sign-flipped so that diag(r) > 0, which makes the factorization unique.
/// Throws SingularError when some |r_jj| < 1e-12 * ||a||_F.
QrFactors qr_reduced(const Matrix& a);

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
/// Certification only; nothing on the training path calls this.
std::vector<double> sym_eigvals(const Matrix& a);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& a);

}  // namespace spdagg
