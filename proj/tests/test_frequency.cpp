#include "doctest.h"
#include "oracles.hpp"

#include "fsa/frequency.hpp"

#include <Eigen/LU>

#include <cmath>

using namespace fsa;

namespace {

constexpr DctMode kModes[] = {DctMode::Ortho, DctMode::PaperLiteral};

double l2(const Tensor& t) { return std::sqrt(oracle::dot(t, t)); }

// Forward basis for one axis from the cosine formula, inverted independently.
Matrix oracle_inverse(std::size_t n, DctMode mode) {
    Matrix m(n, n);
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t k = 0; k < n; ++k)
            m(u, k) = oracle::dct_row_scale(u, n, mode) *
                      std::cos(std::numbers::pi * static_cast<double>((2 * k + 1) * u) / (2.0 * n));
    return m.partialPivLu().inverse();
}

} // namespace

TEST_SUITE("frequency") {

TEST_CASE("dct2 matches the cosine sum on every shape up to 8x8") {
    Rng rng(10);
    std::size_t cases = 0;
    for (DctMode mode : kModes)
        for (std::size_t h = 1; h <= 8; ++h)
            for (std::size_t w = 1; w <= 8; ++w)
                for (int rep = 0; rep < 8; ++rep, ++cases) {
                    const Tensor x = oracle::random_tensor({1 + (cases % 3), h, w}, rng);
                    CHECK(max_abs_diff(dct2(x, mode), oracle::dct2(x, mode)) <= 1e-8);
                }
    CHECK(cases >= 1000);
}

TEST_CASE("constant image has only a DC coefficient") {
    for (DctMode mode : kModes) {
        const Tensor x({2, 5, 6}, 0.37);
        const Tensor y = dct2(x, mode);
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t u = 0; u < 5; ++u)
                for (std::size_t v = 0; v < 6; ++v) {
                    if (u == 0 && v == 0) {
                        CHECK(std::abs(y.at(c, u, v)) > 0.1);
                    } else {
                        CHECK(std::abs(y.at(c, u, v)) < 1e-12);
                    }
                }
    }
}

TEST_CASE("round trips are lossless in both directions") {
    Rng rng(11);
    for (DctMode mode : kModes) {
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const Tensor x = oracle::random_tensor({1, 28, 28}, rng, 0.0, 1.0);
            worst = std::max(worst, max_abs_diff(idct2(dct2(x, mode), mode), x));
            if (i % 10 == 0) {
                const Tensor y = oracle::random_tensor({1, 28, 28}, rng);
                worst = std::max(worst, max_abs_diff(dct2(idct2(y, mode), mode), y));
            }
        }
        CHECK(worst <= 1e-8);
    }
    CHECK(idct2(Tensor({3, 4, 4}), DctMode::PaperLiteral) == Tensor({3, 4, 4}));
}

TEST_CASE("unit DC coefficient inverts to a constant image") {
    for (const auto& [h, w] : {std::pair<std::size_t, std::size_t>{4, 4}, {3, 7}}) {
        Tensor coeffs({1, h, w});
        coeffs.at(0, 0, 0) = 1.0;
        const double hd = static_cast<double>(h), wd = static_cast<double>(w);
        // Column 0 of the inverse basis: 1/N scaled by the reciprocal of the DC row prefactor.
        const double ortho_level = 1.0 / std::sqrt(hd * wd);
        const double literal_level = std::pow(2.0 * hd, 0.25) * std::pow(2.0 * wd, 0.25) / (hd * wd);
        const Tensor a = idct2(coeffs, DctMode::Ortho);
        const Tensor b = idct2(coeffs, DctMode::PaperLiteral);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i] == doctest::Approx(ortho_level).epsilon(1e-12));
            CHECK(b[i] == doctest::Approx(literal_level).epsilon(1e-12));
        }
    }
}

TEST_CASE("plans invert exactly and are deterministic") {
    for (DctMode mode : kModes)
        for (std::size_t n : {1u, 2u, 5u, 28u, 32u}) {
            const DctPlan plan(n, mode);
            const Matrix eye = Matrix::Identity(n, n);
            CHECK((plan.forward() * plan.inverse() - eye).cwiseAbs().maxCoeff() <= 1e-10);
            CHECK((plan.inverse_transpose() - plan.inverse().transpose()).cwiseAbs().maxCoeff() == 0.0);
            CHECK(plan.forward() == DctPlan(n, mode).forward());
            CHECK(&DctPlan::cached(n, mode) == &DctPlan::cached(n, mode));
            if (mode == DctMode::Ortho) {
                CHECK((plan.forward() * plan.forward().transpose() - eye).cwiseAbs().maxCoeff() <= 1e-12);
            }
        }
}

TEST_CASE("Parseval holds in ortho mode") {
    Rng rng(12);
    for (std::size_t i = 0; i < 200; ++i) {
        const Tensor x = oracle::random_tensor({2, 1 + i % 9, 1 + (i / 9) % 11}, rng);
        CHECK(l2(dct2(x, DctMode::Ortho)) == doctest::Approx(l2(x)).epsilon(1e-8));
    }
}

TEST_CASE("ortho pullback is the identity and keeps every sign") {
    Rng rng(13);
    for (std::size_t i = 0; i < 300; ++i) {
        Tensor g = oracle::random_tensor({1 + i % 3, 1 + i % 13, 1 + i % 17}, rng);
        for (std::size_t j = 0; j < g.size(); j += 1 + i % 5) g[j] = 0.0;
        const Tensor p = frequency_pullback(g, DctMode::Ortho);
        CHECK(max_abs_diff(p, g) <= 1e-12);
        CHECK(sign(p) == sign(g));
    }
}

TEST_CASE("pullback is linear") {
    Rng rng(14);
    for (DctMode mode : kModes)
        for (int i = 0; i < 50; ++i) {
            const Tensor g1 = oracle::random_tensor({1, 6, 9}, rng);
            const Tensor g2 = oracle::random_tensor({1, 6, 9}, rng);
            const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
            const Tensor lhs = frequency_pullback(axpy(a * g1, b, g2), mode);
            const Tensor rhs = axpy(a * frequency_pullback(g1, mode), b, frequency_pullback(g2, mode));
            CHECK(max_abs_diff(lhs, rhs) <= 1e-10);
        }
}

TEST_CASE("literal pullback of a constant gradient is a scaled constant") {
    const std::size_t n = 4;
    const Matrix a = oracle_inverse(n, DctMode::PaperLiteral);
    const Matrix aat = a * a.transpose();
    const double c = 0.7;
    const Tensor g({1, n, n}, c);
    const Tensor p = frequency_pullback(g, DctMode::PaperLiteral);
    Matrix gm = Matrix::Constant(n, n, c);
    const Matrix want = aat * gm * aat.transpose();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) CHECK(p.at(0, i, j) == doctest::Approx(want(i, j)).epsilon(1e-12));
    // Each axis contributes sqrt(2/N), so the constant is halved for N = 4.
    for (double v : p.values()) CHECK(v == doctest::Approx(0.5 * c).epsilon(1e-12));
}

TEST_CASE("literal pullback changes some sign for random gradients") {
    Rng rng(15);
    int differing = 0;
    for (std::size_t i = 0; i < 1000; ++i) {
        const Tensor g = oracle::random_tensor({1, 2 + i % 7, 2 + i % 5}, rng);
        if (!(sign(frequency_pullback(g, DctMode::PaperLiteral)) == sign(g))) ++differing;
    }
    CHECK(differing > 0);
}

TEST_CASE("mode names") {
    CHECK(parse_dct_mode("ortho") == DctMode::Ortho);
    CHECK(parse_dct_mode("paper") == DctMode::PaperLiteral);
    CHECK(to_string(DctMode::PaperLiteral) == "paper");
    CHECK_FALSE(parse_dct_mode("dct").has_value());
}

}
