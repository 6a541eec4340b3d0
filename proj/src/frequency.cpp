#include "fsa/frequency.hpp"

#include "fsa/errors.hpp"

#include <Eigen/LU>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <utility>

namespace fsa {

namespace {

constexpr double kFlushRelative = 1e-12;

using ConstMatrixMap = Eigen::Map<const Matrix>;
using MatrixMap = Eigen::Map<Matrix>;

void require_image(const Tensor& t, const char* what) {
    if (t.rank() != 3) throw ShapeError(std::string(what) + ": expected [C,H,W], got " + to_string(t.shape()));
}

template <typename Fn>
Tensor per_channel(const Tensor& in, Fn&& fn) {
    const auto h = static_cast<Eigen::Index>(in.dim(1));
    const auto w = static_cast<Eigen::Index>(in.dim(2));
    Tensor out = Tensor::zeros_like(in);
    const std::size_t plane = in.dim(1) * in.dim(2);
    for (std::size_t c = 0; c < in.dim(0); ++c) {
        MatrixMap(out.data() + c * plane, h, w) = fn(ConstMatrixMap(in.data() + c * plane, h, w));
    }
    return out;
}

} // namespace

std::string_view to_string(DctMode mode) {
    return mode == DctMode::Ortho ? "ortho" : "paper";
}

std::optional<DctMode> parse_dct_mode(std::string_view text) {
    if (text == "ortho" || text == "Ortho") return DctMode::Ortho;
    if (text == "paper" || text == "PaperLiteral" || text == "paper-literal") return DctMode::PaperLiteral;
    return std::nullopt;
}

DctPlan::DctPlan(std::size_t length, DctMode mode) : length_(length), mode_(mode) {
    if (length == 0) throw ArgumentError("DCT length must be positive");
    const auto n = static_cast<Eigen::Index>(length);
    const double nd = static_cast<double>(length);
    forward_.resize(n, n);
    for (Eigen::Index u = 0; u < n; ++u) {
        double scale;
        if (mode == DctMode::Ortho) {
            scale = u == 0 ? std::sqrt(1.0 / nd) : std::sqrt(2.0 / nd);
        } else {
            scale = std::pow(2.0 * nd, -0.25);
        }
        for (Eigen::Index k = 0; k < n; ++k) {
            forward_(u, k) = scale * std::cos(static_cast<double>((2 * k + 1) * u) * std::numbers::pi / (2.0 * nd));
        }
    }
    inverse_ = forward_.fullPivLu().inverse();
    inverse_transpose_ = inverse_.transpose();
}

const DctPlan& DctPlan::cached(std::size_t length, DctMode mode) {
    static std::mutex mutex;
    static std::map<std::pair<std::size_t, DctMode>, std::unique_ptr<DctPlan>> plans;
    std::lock_guard lock(mutex);
    auto& slot = plans[{length, mode}];
    if (!slot) slot = std::make_unique<DctPlan>(length, mode);
    return *slot;
}

Tensor dct2(const Tensor& image, DctMode mode) {
    require_image(image, "dct2");
    const DctPlan& rows = DctPlan::cached(image.dim(1), mode);
    const DctPlan& cols = DctPlan::cached(image.dim(2), mode);
    return per_channel(image, [&](const auto& x) -> Matrix {
        return rows.forward() * x * cols.forward().transpose();
    });
}

Tensor idct2(const Tensor& coeffs, DctMode mode) {
    require_image(coeffs, "idct2");
    const DctPlan& rows = DctPlan::cached(coeffs.dim(1), mode);
    const DctPlan& cols = DctPlan::cached(coeffs.dim(2), mode);
    return per_channel(coeffs, [&](const auto& y) -> Matrix {
        return rows.inverse() * y * cols.inverse_transpose();
    });
}

Tensor frequency_pullback(const Tensor& gradient, DctMode mode) {
    require_image(gradient, "frequency_pullback");
    require_finite(gradient, "frequency_pullback");
    const DctPlan& rows = DctPlan::cached(gradient.dim(1), mode);
    const DctPlan& cols = DctPlan::cached(gradient.dim(2), mode);
    Tensor out = per_channel(gradient, [&](const auto& g) -> Matrix {
        // x = A_H y A_W^T, so dL/dy = A_H^T g A_W.
        const Matrix coeff_grad = rows.inverse_transpose() * g * cols.inverse();
        return rows.inverse() * coeff_grad * cols.inverse_transpose();
    });
    const double floor = kFlushRelative * linf_norm(gradient);
    for (double& v : out.values()) {
        if (std::abs(v) <= floor) v = 0.0;
    }
    return out;
}

} // namespace fsa
