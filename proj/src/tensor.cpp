#include "fsa/tensor.hpp"

#include "fsa/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace fsa {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

template <typename Fn>
Tensor map_values(const Tensor& t, Fn&& fn) {
    Tensor out = Tensor::zeros_like(t);
    std::transform(t.values().begin(), t.values().end(), out.values().begin(), fn);
    return out;
}

template <typename Fn>
Tensor zip_values(const Tensor& a, const Tensor& b, const char* what, Fn&& fn) {
    require_same_shape(a, b, what);
    Tensor out = Tensor::zeros_like(a);
    std::transform(a.values().begin(), a.values().end(), b.values().begin(), out.values().begin(), fn);
    require_finite(out, what);
    return out;
}

struct ConvGeometry {
    std::size_t channels, height, width;
    std::size_t kernel_h, kernel_w;
    std::size_t out_h, out_w;
    std::size_t stride, padding;

    std::size_t patch() const { return channels * kernel_h * kernel_w; }
    std::size_t positions() const { return out_h * out_w; }
};

ConvGeometry geometry(const Shape& input, const Shape& kernel, std::size_t stride, std::size_t padding) {
    if (input.size() != 3) throw ShapeError("conv2d input must be [C,H,W], got " + to_string(input));
    if (kernel.size() != 4) throw ShapeError("conv2d kernel must be [K,C,kh,kw], got " + to_string(kernel));
    if (kernel[1] != input[0]) {
        throw ShapeError("conv2d kernel " + to_string(kernel) + " does not match input channels " +
                         to_string(input));
    }
    if (stride == 0) throw ArgumentError("conv2d stride must be positive");
    ConvGeometry g{input[0], input[1], input[2], kernel[2], kernel[3], 0, 0, stride, padding};
    g.out_h = conv_output_extent(g.height, g.kernel_h, stride, padding);
    g.out_w = conv_output_extent(g.width, g.kernel_w, stride, padding);
    return g;
}

// Columns are output positions, rows are (channel, ky, kx) patch entries.
RowMatrix im2col(const Tensor& input, const ConvGeometry& g) {
    RowMatrix cols = RowMatrix::Zero(static_cast<Eigen::Index>(g.patch()),
                                     static_cast<Eigen::Index>(g.positions()));
    const auto pad = static_cast<std::ptrdiff_t>(g.padding);
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                double* row = cols.row(static_cast<Eigen::Index>((c * g.kernel_h + ky) * g.kernel_w + kx)).data();
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - pad;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
                        row[oy * g.out_w + ox] = input.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                    }
                }
            }
        }
    }
    return cols;
}

Tensor col2im(const RowMatrix& cols, const ConvGeometry& g) {
    Tensor out({g.channels, g.height, g.width});
    const auto pad = static_cast<std::ptrdiff_t>(g.padding);
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const double* row = cols.row(static_cast<Eigen::Index>((c * g.kernel_h + ky) * g.kernel_w + kx)).data();
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - pad;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
                        out.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) += row[oy * g.out_w + ox];
                    }
                }
            }
        }
    }
    return out;
}

} // namespace

std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    if (std::any_of(shape_.begin(), shape_.end(), [](std::size_t e) { return e == 0; })) {
        throw ShapeError("tensor extents must be positive, got " + to_string(shape_));
    }
    if (!std::isfinite(fill)) throw InvalidValueError("tensor fill value must be finite");
    values_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (std::any_of(shape_.begin(), shape_.end(), [](std::size_t e) { return e == 0; })) {
        throw ShapeError("tensor extents must be positive, got " + to_string(shape_));
    }
    if (values_.size() != element_count(shape_)) {
        throw ShapeError("tensor of shape " + to_string(shape_) + " needs " +
                         std::to_string(element_count(shape_)) + " values, got " + std::to_string(values_.size()));
    }
    require_finite(*this, "tensor construction");
}

Tensor Tensor::reshaped(Shape shape) const& { return Tensor(*this).reshaped(std::move(shape)); }

Tensor Tensor::reshaped(Shape shape) && {
    if (element_count(shape) != values_.size()) {
        throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    shape_ = std::move(shape);
    return std::move(*this);
}

bool all_finite(const Tensor& t) noexcept {
    return std::all_of(t.values().begin(), t.values().end(), [](double v) { return std::isfinite(v); });
}

void require_finite(const Tensor& t, const char* what) {
    if (!all_finite(t)) throw InvalidValueError(std::string(what) + ": non-finite value");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
}

Tensor sign(const Tensor& t) {
    require_finite(t, "sign");
    return map_values(t, [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor clamp(const Tensor& t, double lo, double hi) {
    if (!(lo <= hi)) throw ArgumentError("clamp: lower bound exceeds upper bound");
    return map_values(t, [lo, hi](double v) { return std::min(std::max(v, lo), hi); });
}

Tensor clamp(const Tensor& t, const Tensor& lo, const Tensor& hi) {
    require_same_shape(t, lo, "clamp");
    require_same_shape(t, hi, "clamp");
    Tensor out = Tensor::zeros_like(t);
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(lo[i] <= hi[i])) throw ArgumentError("clamp: lower bound exceeds upper bound");
        out[i] = std::min(std::max(t[i], lo[i]), hi[i]);
    }
    return out;
}

Tensor operator+(const Tensor& a, const Tensor& b) {
    return zip_values(a, b, "add", std::plus<>());
}

Tensor operator-(const Tensor& a, const Tensor& b) {
    return zip_values(a, b, "subtract", std::minus<>());
}

Tensor operator*(double s, const Tensor& t) {
    Tensor out = map_values(t, [s](double v) { return s * v; });
    require_finite(out, "scale");
    return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    return zip_values(a, b, "hadamard", std::multiplies<>());
}

Tensor axpy(const Tensor& a, double s, const Tensor& b) {
    return zip_values(a, b, "axpy", [s](double x, double y) { return x + s * y; });
}

double l1_norm(const Tensor& t) {
    double sum = 0.0;
    for (double v : t.values()) sum += std::abs(v);
    return sum;
}

double linf_norm(const Tensor& t) {
    double m = 0.0;
    for (double v : t.values()) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

std::size_t argmax(const Tensor& t) {
    if (t.empty()) throw ArgumentError("argmax of empty tensor");
    return static_cast<std::size_t>(std::max_element(t.values().begin(), t.values().end()) - t.values().begin());
}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
    const std::size_t padded = in + 2 * padding;
    if (stride == 0 || kernel == 0 || kernel > padded || (padded - kernel) % stride != 0) {
        throw ShapeError("convolution of extent " + std::to_string(in) + " with kernel " + std::to_string(kernel) +
                         ", stride " + std::to_string(stride) + ", padding " + std::to_string(padding) +
                         " has no integral output extent");
    }
    return (padded - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding) {
    const ConvGeometry g = geometry(input.shape(), kernel.shape(), stride, padding);
    const RowMatrix cols = im2col(input, g);
    const auto k = static_cast<Eigen::Index>(kernel.dim(0));
    Tensor out({kernel.dim(0), g.out_h, g.out_w});
    MatrixMap(out.data(), k, cols.cols()).noalias() =
        ConstMatrixMap(kernel.data(), k, cols.rows()) * cols;
    return out;
}

Tensor conv2d_backward_input(const Tensor& grad_output, const Tensor& kernel, const Shape& input_shape,
                             std::size_t stride, std::size_t padding) {
    const ConvGeometry g = geometry(input_shape, kernel.shape(), stride, padding);
    if (grad_output.shape() != Shape{kernel.dim(0), g.out_h, g.out_w}) {
        throw ShapeError("conv2d_backward_input: gradient shape " + to_string(grad_output.shape()));
    }
    const auto k = static_cast<Eigen::Index>(kernel.dim(0));
    const auto patch = static_cast<Eigen::Index>(g.patch());
    const auto positions = static_cast<Eigen::Index>(g.positions());
    RowMatrix cols = ConstMatrixMap(kernel.data(), k, patch).transpose() *
                     ConstMatrixMap(grad_output.data(), k, positions);
    return col2im(cols, g);
}

Tensor conv2d_backward_kernel(const Tensor& grad_output, const Tensor& input, const Shape& kernel_shape,
                              std::size_t stride, std::size_t padding) {
    const ConvGeometry g = geometry(input.shape(), kernel_shape, stride, padding);
    if (grad_output.shape() != Shape{kernel_shape[0], g.out_h, g.out_w}) {
        throw ShapeError("conv2d_backward_kernel: gradient shape " + to_string(grad_output.shape()));
    }
    const RowMatrix cols = im2col(input, g);
    const auto k = static_cast<Eigen::Index>(kernel_shape[0]);
    Tensor out(kernel_shape);
    MatrixMap(out.data(), k, cols.rows()).noalias() =
        ConstMatrixMap(grad_output.data(), k, cols.cols()) * cols.transpose();
    return out;
}

} // namespace fsa
