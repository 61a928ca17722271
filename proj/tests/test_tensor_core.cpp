#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "spdagg/errors.hpp"
#include "spdagg/linalg.hpp"
#include "spdagg/matrix.hpp"
#include "spdagg/random.hpp"

using namespace spdagg;

TEST_CASE("matmul") {
    SUBCASE("identity") {
        const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
        CHECK(matmul(Matrix::identity(2), a) == a);
    }
    SUBCASE("hand arithmetic") {
        const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
        const Matrix b = Matrix::from_rows({{0}, {1}});
        CHECK(matmul(a, b) == Matrix::from_rows({{2}, {4}}));
    }
    SUBCASE("matches naive triple loop exactly") {
        RandomStream rng(3);
        const Matrix a = rng.normal_matrix(7, 5);
        const Matrix b = rng.normal_matrix(5, 3);
        CHECK(matmul(a, b) == oracle::naive_matmul(a, b));
    }
    SUBCASE("shape mismatch names both shapes") {
        try {
            matmul(Matrix(2, 3), Matrix(2, 3));
            FAIL("expected ContractError");
        } catch (const ContractError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("(2x3)") != std::string::npos);
        }
    }
}

TEST_CASE("matmul is associative within 1e-9 relative") {
    RandomStream rng(11);
    for (int t = 0; t < 50; ++t) {
        const std::size_t m = 1 + rng.index(8), n = 1 + rng.index(8), p = 1 + rng.index(8), q = 1 + rng.index(8);
        const Matrix a = rng.normal_matrix(m, n), b = rng.normal_matrix(n, p), c = rng.normal_matrix(p, q);
        const Matrix left = matmul(matmul(a, b), c);
        const Matrix right = matmul(a, matmul(b, c));
        CHECK(frobenius_norm(subtract(left, right)) <= 1e-9 * std::max(1.0, frobenius_norm(left)));
    }
}

TEST_CASE("FeatureTensor reshape round trip") {
    RandomStream rng(5);
    FeatureTensor x(3, 2, 4);
    for (double& v : x.data()) v = rng.normal();
    const Matrix m = x.as_matrix();
    CHECK(m.rows() == 3);
    CHECK(m.cols() == 8);
    CHECK(m(1, 5) == x.at(1, 1, 1));
    CHECK(FeatureTensor::from_matrix(m, 2, 4) == x);
    CHECK_THROWS_AS(FeatureTensor::from_matrix(m, 3, 3), ContractError);
}

TEST_CASE("qr_reduced") {
    SUBCASE("semi-orthogonal input is a fixed point") {
        RandomStream rng(1);
        const Matrix q0 = qr_reduced(rng.normal_matrix(6, 3)).q;
        const QrFactors f = qr_reduced(q0);
        CHECK(max_abs_diff(f.q, q0) < 1e-10);
        CHECK(max_abs_diff(f.r, Matrix::identity(3)) < 1e-10);
    }
    SUBCASE("scaled axes") {
        const Matrix a = Matrix::from_rows({{2, 0}, {0, 3}, {0, 0}});
        const QrFactors f = qr_reduced(a);
        CHECK(max_abs_diff(f.q, Matrix::from_rows({{1, 0}, {0, 1}, {0, 0}})) < 1e-12);
        CHECK(max_abs_diff(f.r, Matrix::from_rows({{2, 0}, {0, 3}})) < 1e-12);
    }
    SUBCASE("negative leading entries still give positive diagonal") {
        const Matrix a = Matrix::from_rows({{-2, 1}, {0, -3}, {0, 0}});
        const QrFactors f = qr_reduced(a);
        CHECK(f.r(0, 0) > 0.0);
        CHECK(f.r(1, 1) > 0.0);
        CHECK(max_abs_diff(matmul(f.q, f.r), a) < 1e-12);
    }
    SUBCASE("rank deficiency") {
        const Matrix a = Matrix::from_rows({{1, 2}, {2, 4}, {3, 6}});
        CHECK_THROWS_AS(qr_reduced(a), SingularError);
        CHECK_THROWS_AS(qr_reduced(Matrix(2, 3, 1.0)), ContractError);
    }
    SUBCASE("random full-rank inputs: orthogonality, reconstruction, triangularity") {
        RandomStream rng(2024);
        for (int t = 0; t < 100; ++t) {
            const std::size_t p = 1 + rng.index(6);
            const std::size_t n = p + rng.index(5);
            const Matrix a = rng.normal_matrix(n, p);
            const QrFactors f = qr_reduced(a);
            CHECK(orthogonality_error(f.q) < 1e-10);
            CHECK(frobenius_norm(subtract(matmul(f.q, f.r), a)) < 1e-10 * frobenius_norm(a));
            for (std::size_t i = 0; i < p; ++i) {
                CHECK(f.r(i, i) > 0.0);
                for (std::size_t j = 0; j < i; ++j) CHECK(f.r(i, j) == 0.0);
            }
        }
    }
}

TEST_CASE("sym_eigvals") {
    SUBCASE("diagonal") {
        const auto e = sym_eigvals(Matrix::from_rows({{3, 0, 0}, {0, 1, 0}, {0, 0, 2}}));
        REQUIRE(e.size() == 3);
        CHECK(e[0] == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(e[1] == doctest::Approx(2.0).epsilon(1e-14));
        CHECK(e[2] == doctest::Approx(3.0).epsilon(1e-14));
    }
    SUBCASE("known 2x2") {
        const auto e = sym_eigvals(Matrix::from_rows({{2, 1}, {1, 2}}));
        CHECK(std::abs(e[0] - 1.0) < 1e-14);
        CHECK(std::abs(e[1] - 3.0) < 1e-14);
    }
    SUBCASE("asymmetric input rejected") {
        CHECK_THROWS_AS(sym_eigvals(Matrix::from_rows({{1, 2}, {0, 1}})), ContractError);
    }
    SUBCASE("Gram matrices are PSD and the trace is preserved") {
        RandomStream rng(8);
        for (int t = 0; t < 30; ++t) {
            const Matrix a = rng.normal_matrix(3 + rng.index(6), 2 + rng.index(8));
            const Matrix g = matmul(transpose(a), a);
            const auto e = sym_eigvals(g);
            CHECK(e.front() >= -1e-10);
            const double sum = std::accumulate(e.begin(), e.end(), 0.0);
            CHECK(std::abs(sum - trace(g)) <= 1e-8 * frobenius_norm(g));
        }
    }
    SUBCASE("recovers the spectrum of Q diag(lambda) Q^T") {
        RandomStream rng(9);
        for (int t = 0; t < 20; ++t) {
            const std::size_t n = 2 + rng.index(9);
            const Matrix q = qr_reduced(rng.normal_matrix(n, n)).q;
            std::vector<double> lambda(n);
            for (double& l : lambda) l = 10.0 * rng.uniform() - 5.0;
            Matrix d(n, n);
            for (std::size_t i = 0; i < n; ++i) d(i, i) = lambda[i];
            const Matrix a = symmetrize(matmul(matmul(q, d), transpose(q)));
            auto e = sym_eigvals(a);
            std::sort(lambda.begin(), lambda.end());
            for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(e[i] - lambda[i]) < 1e-8);
        }
    }
}

TEST_CASE("seeded_rng") {
    SUBCASE("same seed, same stream") {
        RandomStream a = seeded_rng(42), b = seeded_rng(42);
        for (int i = 0; i < 100; ++i) {
            CHECK(a.normal() == b.normal());
            CHECK(a.uniform() == b.uniform());
        }
    }
    SUBCASE("normal sample mean") {
        RandomStream rng(42);
        double s = 0.0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) s += rng.normal();
        CHECK(std::abs(s / n) < 0.02);
    }
    SUBCASE("uniform range") {
        RandomStream rng(7);
        for (int i = 0; i < 100000; ++i) {
            const double u = rng.uniform();
            CHECK((u >= 0.0 && u < 1.0));
        }
    }
}
