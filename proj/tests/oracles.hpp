#pragma once

// Reference implementations for the tests. Each one is written directly from
// the defining formula and shares no code with the library.

#include "fsa/frequency.hpp"
#include "fsa/model.hpp"
#include "fsa/random.hpp"
#include "fsa/tensor.hpp"

#include <cmath>
#include <numbers>

namespace fsa::oracle {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

inline double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Zero-padded cross-correlation, one output element at a time.
inline Tensor conv2d(const Tensor& x, const Tensor& k, std::size_t stride, std::size_t pad) {
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const std::size_t K = k.dim(0), kh = k.dim(2), kw = k.dim(3);
    const std::size_t oh = (H + 2 * pad - kh) / stride + 1;
    const std::size_t ow = (W + 2 * pad - kw) / stride + 1;
    Tensor out({K, oh, ow});
    for (std::size_t o = 0; o < K; ++o)
        for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t a = 0; a < kh; ++a)
                        for (std::size_t b = 0; b < kw; ++b) {
                            const long r = static_cast<long>(i * stride + a) - static_cast<long>(pad);
                            const long q = static_cast<long>(j * stride + b) - static_cast<long>(pad);
                            if (r < 0 || q < 0 || r >= static_cast<long>(H) || q >= static_cast<long>(W)) continue;
                            s += x.at(c, r, q) * k[((o * C + c) * kh + a) * kw + b];
                        }
                out.at(o, i, j) = s;
            }
    return out;
}

// Per-axis scale of basis row u for a transform of length n.
inline double dct_row_scale(std::size_t u, std::size_t n, DctMode mode) {
    if (mode == DctMode::PaperLiteral) return std::pow(2.0 * static_cast<double>(n), -0.25);
    return u == 0 ? std::sqrt(1.0 / static_cast<double>(n)) : std::sqrt(2.0 / static_cast<double>(n));
}

// Coefficient [c,u,v] as the quadruple cosine sum.
inline double dct_coefficient(const Tensor& x, std::size_t c, std::size_t u, std::size_t v, DctMode mode) {
    const std::size_t H = x.dim(1), W = x.dim(2);
    double s = 0.0;
    for (std::size_t k = 0; k < H; ++k)
        for (std::size_t m = 0; m < W; ++m)
            s += x.at(c, k, m) * std::cos(std::numbers::pi * static_cast<double>((2 * k + 1) * u) / (2.0 * H)) *
                 std::cos(std::numbers::pi * static_cast<double>((2 * m + 1) * v) / (2.0 * W));
    return dct_row_scale(u, H, mode) * dct_row_scale(v, W, mode) * s;
}

inline Tensor dct2(const Tensor& x, DctMode mode) {
    Tensor out(x.shape());
    for (std::size_t c = 0; c < x.dim(0); ++c)
        for (std::size_t u = 0; u < x.dim(1); ++u)
            for (std::size_t v = 0; v < x.dim(2); ++v) out.at(c, u, v) = dct_coefficient(x, c, u, v, mode);
    return out;
}

// Central difference of the loss along coordinate i.
inline double finite_difference(const Classifier& model, const Tensor& x, std::size_t label, std::size_t i,
                                double h = 1e-5) {
    Tensor plus = x, minus = x;
    plus[i] += h;
    minus[i] -= h;
    return (cross_entropy(forward(model, plus), label) - cross_entropy(forward(model, minus), label)) / (2.0 * h);
}

inline double relative_error(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

} // namespace fsa::oracle
