#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "spdagg/errors.hpp"
#include "spdagg/fts.hpp"
#include "spdagg/linalg.hpp"
#include "spdagg/synth.hpp"

using namespace spdagg;

TEST_CASE("synth_generate basics") {
    const FtsDataset a = synth_generate(3, 4, 5, 2, 3, 11);
    CHECK(a.size() == 12);
    CHECK(a.channels == 5);
    CHECK(a.height == 2);
    CHECK(a.width == 3);
    CHECK(a.num_classes == 3);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.labels[i] == i % 3);
    CHECK_NOTHROW(a.validate());

    CHECK(synth_generate(3, 4, 5, 2, 3, 11) == a);
    CHECK_FALSE(synth_generate(3, 4, 5, 2, 3, 12) == a);
    CHECK(decode_fts(encode_fts(a)) == a);
    CHECK_THROWS_AS(synth_generate(1, 4, 5, 2, 3, 11), ContractError);
}

TEST_CASE("class covariances are SPD with the 0.1 ridge") {
    const auto sigmas = synth_class_covariances(4, 6, 9);
    REQUIRE(sigmas.size() == 4);
    for (const Matrix& s : sigmas) {
        CHECK(is_symmetric(s, 0.0));
        CHECK(min_eigenvalue(s) >= 0.1 - 1e-12);
    }
    CHECK(max_abs_diff(sigmas[0], sigmas[1]) > 0.05);
}

TEST_CASE("per-position covariance approaches Sigma_k") {
    const std::size_t c0 = 6, classes = 2;
    // 500 samples per class x 20 positions = 10^4 positions per class
    const FtsDataset ds = synth_generate(classes, 500, c0, 4, 5, 21);
    const auto sigmas = synth_class_covariances(classes, c0, 21);
    for (std::size_t k = 0; k < classes; ++k) {
        Matrix acc(c0, c0);
        std::size_t count = 0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (ds.labels[i] != k) continue;
            const Matrix m = ds.samples[i].as_matrix();
            for (std::size_t n = 0; n < m.cols(); ++n) {
                for (std::size_t a = 0; a < c0; ++a)
                    for (std::size_t b = 0; b < c0; ++b) acc(a, b) += m(a, n) * m(b, n);
                ++count;
            }
        }
        CHECK(count == 10000);
        const Matrix est = scale(acc, 1.0 / static_cast<double>(count));
        const double rel = frobenius_norm(subtract(est, sigmas[k])) / frobenius_norm(sigmas[k]);
        INFO("class " << k << " rel err " << rel);
        CHECK(rel < 0.1);
    }
}

TEST_CASE("average-pooled features carry no first-order signal") {
    const std::size_t c0 = 16;
    const FtsDataset ds = synth_generate(2, 1000, c0, 6, 6, 7);
    std::vector<std::vector<double>> mean(2, std::vector<double>(c0, 0.0));
    std::vector<double> sq(c0, 0.0), all(c0, 0.0);
    std::vector<std::size_t> per(2, 0);
    std::vector<std::vector<double>> pooled;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const Matrix m = ds.samples[i].as_matrix();
        std::vector<double> p(c0, 0.0);
        for (std::size_t c = 0; c < c0; ++c) {
            for (std::size_t n = 0; n < m.cols(); ++n) p[c] += m(c, n);
            p[c] /= static_cast<double>(m.cols());
            mean[ds.labels[i]][c] += p[c];
            all[c] += p[c];
        }
        ++per[ds.labels[i]];
        pooled.push_back(p);
    }
    for (std::size_t c = 0; c < c0; ++c) all[c] /= static_cast<double>(ds.size());
    for (const auto& p : pooled)
        for (std::size_t c = 0; c < c0; ++c) sq[c] += (p[c] - all[c]) * (p[c] - all[c]);
    double dist2 = 0.0, var = 0.0;
    for (std::size_t c = 0; c < c0; ++c) {
        const double d = mean[0][c] / static_cast<double>(per[0]) - mean[1][c] / static_cast<double>(per[1]);
        dist2 += d * d;
        var += sq[c] / static_cast<double>(ds.size() - 1);
    }
    // class-mean distance against the total std of the pooled feature vector
    const double ratio = std::sqrt(dist2) / std::sqrt(var);
    INFO("mean distance / std = " << ratio);
    CHECK(ratio < 0.1);
}
