#include "spdagg/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "spdagg/errors.hpp"

namespace spdagg {

QrFactors qr_reduced(const Matrix& a) {
    const std::size_t n = a.rows();
    const std::size_t p = a.cols();
    if (n < p) throw ContractError("qr_reduced: need rows >= cols, got " + a.shape_string());
    if (p == 0) throw ContractError("qr_reduced: empty matrix");

    const double norm_a = frobenius_norm(a);
    Matrix work = a;
    // Householder vectors, v_j has support on rows j..n-1.
    std::vector<std::vector<double>> reflectors;
    reflectors.reserve(p);

    for (std::size_t j = 0; j < p; ++j) {
        double col_norm = 0.0;
        for (std::size_t i = j; i < n; ++i) col_norm += work(i, j) * work(i, j);
        col_norm = std::sqrt(col_norm);

        std::vector<double> v(n - j, 0.0);
        if (col_norm == 0.0) {
            reflectors.push_back(std::move(v));
            continue;
        }
        const double alpha = work(j, j) >= 0.0 ? -col_norm : col_norm;
        for (std::size_t i = j; i < n; ++i) v[i - j] = work(i, j);
        v[0] -= alpha;
        double v_norm_sq = 0.0;
        for (double x : v) v_norm_sq += x * x;
        if (v_norm_sq > 0.0) {
            for (std::size_t k = j; k < p; ++k) {
                double dot = 0.0;
                for (std::size_t i = j; i < n; ++i) dot += v[i - j] * work(i, k);
                const double f = 2.0 * dot / v_norm_sq;
                for (std::size_t i = j; i < n; ++i) work(i, k) -= f * v[i - j];
            }
            const double inv = 1.0 / std::sqrt(v_norm_sq);
            for (double& x : v) x *= inv;
        }
        reflectors.push_back(std::move(v));
    }

    Matrix r(p, p);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t k = i; k < p; ++k) r(i, k) = work(i, k);

    for (std::size_t j = 0; j < p; ++j) {
        if (!(std::abs(r(j, j)) >= 1e-12 * norm_a)) {
            throw SingularError("qr_reduced: rank deficient at column " + std::to_string(j) +
                                " (|r_jj| = " + std::to_string(std::abs(r(j, j))) + ")");
        }
    }

    // Q = H_0 H_1 ... H_{p-1} applied to the first p columns of I.
    Matrix q(n, p);
    for (std::size_t i = 0; i < p; ++i) q(i, i) = 1.0;
    for (std::size_t jj = p; jj-- > 0;) {
        const auto& v = reflectors[jj];
        for (std::size_t k = 0; k < p; ++k) {
            double dot = 0.0;
            for (std::size_t i = jj; i < n; ++i) dot += v[i - jj] * q(i, k);
            const double f = 2.0 * dot;
            for (std::size_t i = jj; i < n; ++i) q(i, k) -= f * v[i - jj];
        }
    }

    for (std::size_t j = 0; j < p; ++j) {
        if (r(j, j) < 0.0) {
            for (std::size_t k = j; k < p; ++k) r(j, k) = -r(j, k);
            for (std::size_t i = 0; i < n; ++i) q(i, j) = -q(i, j);
        }
    }
    return {std::move(q), std::move(r)};
}

std::vector<double> sym_eigvals(const Matrix& a) {
    if (a.rows() != a.cols()) throw ContractError("sym_eigvals: non-square " + a.shape_string());
    if (!is_symmetric(a, 1e-10 * std::max(1.0, max_abs(a)))) {
        throw ContractError("sym_eigvals: input is not symmetric");
    }
    const std::size_t n = a.rows();
    Matrix m = symmetrize(a);

    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) s += m(i, j) * m(i, j);
        return std::sqrt(s);
    };

    const double scale_ref = std::max(frobenius_norm(m), 1e-300);
    for (int sweep = 0; sweep < 100 && off_norm() > 1e-15 * scale_ref; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = m(p, q);
                if (apq == 0.0) continue;
                const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double mkp = m(k, p);
                    const double mkq = m(k, q);
                    m(k, p) = c * mkp - s * mkq;
                    m(k, q) = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double mpk = m(p, k);
                    const double mqk = m(q, k);
                    m(p, k) = c * mpk - s * mqk;
                    m(q, k) = s * mpk + c * mqk;
                }
            }
        }
    }

    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = m(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

double min_eigenvalue(const Matrix& a) {
    const auto eig = sym_eigvals(a);
    return eig.empty() ? 0.0 : eig.front();
}

}  // namespace spdagg
