#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "spdagg/errors.hpp"
#include "spdagg/vector_head.hpp"

using namespace spdagg;

namespace {

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Upper triangle with sqrt(2) off-diagonal, written out independently.
std::vector<double> loop_vectorize(const Matrix& y) {
    std::vector<double> v;
    for (std::size_t i = 0; i < y.rows(); ++i)
        for (std::size_t j = i; j < y.cols(); ++j) v.push_back(i == j ? y(i, j) : std::sqrt(2.0) * y(i, j));
    return v;
}

// Symmetric matrix from its n(n+1)/2 free parameters.
Matrix sym_from_params(const std::vector<double>& p, std::size_t n) {
    Matrix y(n, n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            y(i, j) = p[k];
            y(j, i) = p[k];
            ++k;
        }
    return y;
}

}  // namespace

TEST_CASE("vectorize") {
    SUBCASE("2x2 hand case") {
        const HeadVector v = vectorize(Matrix::from_rows({{1, 2}, {2, 3}}));
        REQUIRE(v.size() == 3);
        CHECK(v[0] == 1.0);
        CHECK(std::abs(v[1] - 2.82843) < 1e-5);
        CHECK(v[1] == 2.0 * std::sqrt(2.0));
        CHECK(v[2] == 3.0);
        CHECK(std::abs(dot(v, v) - 18.0) < 1e-12);
    }
    SUBCASE("identity") {
        CHECK(vectorize(Matrix::identity(3)) == HeadVector{1, 0, 0, 1, 0, 1});
    }
    SUBCASE("norm bridge on random symmetric matrices") {
        RandomStream rng(3);
        for (int t = 0; t < 100; ++t) {
            const Matrix y = oracle::random_symmetric(rng, 1 + rng.index(8));
            const HeadVector v = vectorize(y);
            CHECK(v.size() == head_dim(y.rows()));
            CHECK(v == loop_vectorize(y));
            CHECK(std::abs(norm2(v) - frobenius_norm(y)) < 1e-12);
        }
    }
    SUBCASE("asymmetric rejected") {
        CHECK_THROWS_AS(vectorize(Matrix::from_rows({{1, 2}, {2.1, 1}})), ContractError);
    }
}

TEST_CASE("vectorize_backward") {
    RandomStream rng(5);
    SUBCASE("zero") {
        CHECK(max_abs(vectorize_backward(HeadVector(6, 0.0), 3)) == 0.0);
    }
    SUBCASE("length mismatch") {
        CHECK_THROWS_AS(vectorize_backward(HeadVector(5, 1.0), 3), ContractError);
    }
    SUBCASE("2x2 placement") {
        const Matrix g = vectorize_backward(HeadVector{1.0, 2.0, 3.0}, 2);
        CHECK(g(0, 0) == 1.0);
        CHECK(g(1, 1) == 3.0);
        CHECK(std::abs(g(0, 1) - 2.0 / std::sqrt(2.0)) < 1e-15);
        CHECK(g(0, 1) == g(1, 0));
    }
    SUBCASE("half squared norm reshapes to Y") {
        const Matrix y = oracle::random_symmetric(rng, 5);
        const HeadVector v = vectorize(y);
        CHECK(max_abs_diff(vectorize_backward(v, 5), y) < 1e-12);
    }
    SUBCASE("adjoint: finite differences over the free parameters") {
        for (int t = 0; t < 50; ++t) {
            const std::size_t n = 1 + rng.index(6);
            const std::size_t d = head_dim(n);
            std::vector<double> grad_v(d), params(d);
            for (double& x : grad_v) x = rng.normal();
            for (double& x : params) x = rng.normal();
            const Matrix g = vectorize_backward(grad_v, n);
            CHECK(is_symmetric(g, 0.0));
            auto f = [&](const std::vector<double>& p) { return dot(grad_v, loop_vectorize(sym_from_params(p, n))); };
            const auto numeric = oracle::central_differences(f, params);
            // dL/dp for the shared (i,j),(j,i) parameter is g_ij + g_ji
            std::vector<double> analytic;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i; j < n; ++j) analytic.push_back(i == j ? g(i, i) : g(i, j) + g(j, i));
            CHECK(oracle::max_rel_error(analytic, numeric) < 1e-8);
        }
    }
}

TEST_CASE("power_normalize") {
    const PowerNormResult r = power_normalize(HeadVector{4.0, -9.0, 0.0});
    CHECK(r.output == HeadVector{2.0, -3.0, 0.0});
    CHECK(power_normalize(power_normalize(HeadVector{16.0}).output).output[0] == 2.0);

    SUBCASE("gradient away from zero") {
        RandomStream rng(9);
        for (int t = 0; t < 20; ++t) {
            std::vector<double> v(10), g(10);
            for (double& x : v) {
                do x = rng.normal(); while (std::abs(x) <= 1e-3);
            }
            for (double& x : g) x = rng.normal();
            const PowerNormResult tape = power_normalize(v);
            auto f = [&](const std::vector<double>& p) {
                std::vector<double> o(p.size());
                for (std::size_t i = 0; i < p.size(); ++i) o[i] = std::copysign(std::sqrt(std::abs(p[i])), p[i]);
                return dot(g, o);
            };
            const auto numeric = oracle::central_differences(f, v, 1e-7);
            CHECK(oracle::max_rel_error(power_normalize_backward(tape, g), numeric) < 1e-5);
        }
    }
    SUBCASE("gradient at zero is clamped") {
        const PowerNormResult tape = power_normalize(HeadVector{0.0});
        const HeadVector g = power_normalize_backward(tape, HeadVector{1.0});
        CHECK(std::isfinite(g[0]));
        CHECK(std::abs(g[0] - 0.5 / std::sqrt(kPowerNormEpsilon)) < 1e-6);
    }
}

TEST_CASE("l2_normalize") {
    const L2NormResult r = l2_normalize(HeadVector{3.0, 4.0});
    CHECK(std::abs(r.output[0] - 0.6) < 1e-15);
    CHECK(std::abs(r.output[1] - 0.8) < 1e-15);
    CHECK(r.norm == 5.0);
    CHECK(l2_normalize(HeadVector{0.0, 1.0, 0.0}).output == HeadVector{0.0, 1.0, 0.0});

    SUBCASE("zero vector passes through with identity gradient") {
        const L2NormResult z = l2_normalize(HeadVector{0.0, 0.0});
        CHECK(z.output == HeadVector{0.0, 0.0});
        CHECK(l2_normalize_backward(z, HeadVector{1.0, -2.0}) == HeadVector{1.0, -2.0});
    }
    SUBCASE("unit norm and finite differences") {
        RandomStream rng(10);
        for (int t = 0; t < 20; ++t) {
            std::vector<double> v(8), g(8);
            for (double& x : v) x = rng.normal();
            for (double& x : g) x = rng.normal();
            const L2NormResult tape = l2_normalize(v);
            CHECK(std::abs(norm2(tape.output) - 1.0) < 1e-12);
            auto f = [&](const std::vector<double>& p) {
                const double n = norm2(p);
                double s = 0.0;
                for (std::size_t i = 0; i < p.size(); ++i) s += g[i] * p[i] / n;
                return s;
            };
            CHECK(oracle::max_rel_error(l2_normalize_backward(tape, g), oracle::central_differences(f, v)) < 1e-6);
        }
    }
}

namespace {

double loop_ce(const std::vector<double>& v, const Matrix& w, const std::vector<double>& b, std::size_t label) {
    std::vector<double> z(w.rows());
    for (std::size_t k = 0; k < w.rows(); ++k) {
        z[k] = b[k];
        for (std::size_t j = 0; j < v.size(); ++j) z[k] += w(k, j) * v[j];
    }
    double mx = z[0];
    for (double x : z) mx = std::max(mx, x);
    double s = 0.0;
    for (double x : z) s += std::exp(x - mx);
    return -(z[label] - mx - std::log(s));
}

}  // namespace

TEST_CASE("dense_softmax_ce") {
    SUBCASE("uniform logits") {
        const DenseParams p{Matrix(2, 3), {0.0, 0.0}};
        const SoftmaxCeResult r = dense_softmax_ce(HeadVector{1, 2, 3}, p, 1);
        CHECK(std::abs(r.loss - 0.69315) < 1e-5);
        CHECK(std::abs(r.loss - std::log(2.0)) < 1e-15);
        const DenseParams p5{Matrix(5, 3), std::vector<double>(5, 0.7)};
        CHECK(std::abs(dense_softmax_ce(HeadVector{1, 2, 3}, p5, 4).loss - std::log(5.0)) < 1e-14);
    }
    SUBCASE("saturation") {
        const DenseParams p{Matrix(2, 1), {100.0, 0.0}};
        const SoftmaxCeResult r = dense_softmax_ce(HeadVector{0.0}, p, 0);
        CHECK(r.loss < 1e-40);
        CHECK(r.loss >= 0.0);
        CHECK(r.prediction == 0);
        const SoftmaxCeResult wrong = dense_softmax_ce(HeadVector{0.0}, p, 1);
        CHECK(std::abs(wrong.loss - 100.0) < 1e-12);
    }
    SUBCASE("label out of range") {
        const DenseParams p{Matrix(2, 1), {0.0, 0.0}};
        CHECK_THROWS_AS(dense_softmax_ce(HeadVector{0.0}, p, 2), ContractError);
    }
    SUBCASE("all three gradients match finite differences") {
        RandomStream rng(13);
        for (int t = 0; t < 20; ++t) {
            const std::size_t classes = 2 + rng.index(4), d = 1 + rng.index(8);
            const std::size_t label = rng.index(classes);
            std::vector<double> v(d), b(classes);
            for (double& x : v) x = rng.normal();
            for (double& x : b) x = rng.normal();
            const Matrix w = rng.normal_matrix(classes, d);
            const SoftmaxCeResult r = dense_softmax_ce(v, DenseParams{w, b}, label);
            CHECK(r.loss >= 0.0);
            CHECK(std::abs(r.loss - loop_ce(v, w, b, label)) < 1e-12);

            const auto nv = oracle::central_differences([&](const std::vector<double>& x) { return loop_ce(x, w, b, label); }, v);
            CHECK(oracle::max_rel_error(r.grads.input, nv) < 1e-6);
            const auto nw = oracle::central_differences(
                [&](const std::vector<double>& x) { return loop_ce(v, oracle::as_matrix(classes, d, x), b, label); },
                oracle::as_vector(w));
            CHECK(oracle::max_rel_error(r.grads.weights.data(), nw) < 1e-6);
            const auto nb = oracle::central_differences([&](const std::vector<double>& x) { return loop_ce(v, w, x, label); }, b);
            CHECK(oracle::max_rel_error(r.grads.bias, nb) < 1e-6);
        }
    }
}

TEST_CASE("end-to-end head gradient w.r.t. Y") {
    RandomStream rng(21);
    for (int t = 0; t < 20; ++t) {
        const std::size_t n = 2 + rng.index(4), classes = 3;
        const std::size_t d = head_dim(n);
        std::vector<double> params(d);
        for (double& x : params) {
            do x = rng.normal(); while (std::abs(x) <= 1e-2);
        }
        const Matrix w = rng.normal_matrix(classes, d);
        const std::vector<double> b{0.1, -0.2, 0.3};
        const std::size_t label = rng.index(classes);

        auto head = [&](const Matrix& y) {
            const HeadVector v = vectorize(y);
            const PowerNormResult p = power_normalize(v);
            const L2NormResult l = l2_normalize(p.output);
            return std::make_tuple(p, l, dense_softmax_ce(l.output, DenseParams{w, b}, label));
        };
        const Matrix y = sym_from_params(params, n);
        const auto [p, l, ce] = head(y);
        const HeadVector gl = l2_normalize_backward(l, ce.grads.input);
        const HeadVector gp = power_normalize_backward(p, gl);
        const Matrix gy = vectorize_backward(gp, n);

        bool far = true;
        for (double x : p.input) far = far && std::abs(x) > 1e-3;
        if (!far) continue;

        auto f = [&](const std::vector<double>& q) { return std::get<2>(head(sym_from_params(q, n))).loss; };
        const auto numeric = oracle::central_differences(f, params);
        std::vector<double> analytic;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) analytic.push_back(i == j ? gy(i, i) : gy(i, j) + gy(j, i));
        CHECK(oracle::max_rel_error(analytic, numeric) < 1e-5);
    }
}
