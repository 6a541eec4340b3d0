#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fsa {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major array of doubles. Images use the channel-first [C,H,W]
/// layout; convolution kernels are [K,C,kh,kw].
///
/// Every constructor rejects non-finite values, and every free function in
/// this header returns a new tensor instead of modifying its arguments.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    const double* data() const noexcept { return values_.data(); }
    double* data() noexcept { return values_.data(); }

    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    /// Element of a rank-3 [C,H,W] tensor.
    double at(std::size_t c, std::size_t h, std::size_t w) const {
        return values_[(c * shape_[1] + h) * shape_[2] + w];
    }
    double& at(std::size_t c, std::size_t h, std::size_t w) {
        return values_[(c * shape_[1] + h) * shape_[2] + w];
    }

    /// Same values, new extents; the element count must match.
    Tensor reshaped(Shape shape) const&;
    Tensor reshaped(Shape shape) &&;

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<double> values_;
};

bool all_finite(const Tensor& t) noexcept;
/// Throws InvalidValueError naming `what` if any value is NaN or infinite.
void require_finite(const Tensor& t, const char* what);
/// Throws ShapeError unless both tensors have identical extents.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

/// Ternary sign: +1, -1, or 0 for an exact zero.
Tensor sign(const Tensor& t);
Tensor clamp(const Tensor& t, double lo, double hi);
/// Elementwise clamp to [lo[i], hi[i]].
Tensor clamp(const Tensor& t, const Tensor& lo, const Tensor& hi);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& t);
Tensor hadamard(const Tensor& a, const Tensor& b);
/// a + s * b
Tensor axpy(const Tensor& a, double s, const Tensor& b);

double l1_norm(const Tensor& t);
double linf_norm(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);
std::size_t argmax(const Tensor& t);

/// Output extent of a convolution along one axis; throws ShapeError when the
/// stride does not tile the padded input exactly.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding);

/// Cross-correlation of input [C,H,W] with kernel [K,C,kh,kw] and zero padding.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding);

/// Gradient of a conv2d output with respect to its input.
Tensor conv2d_backward_input(const Tensor& grad_output, const Tensor& kernel,
                             const Shape& input_shape, std::size_t stride, std::size_t padding);

/// Gradient of a conv2d output with respect to its kernel.
Tensor conv2d_backward_kernel(const Tensor& grad_output, const Tensor& input,
                              const Shape& kernel_shape, std::size_t stride, std::size_t padding);

} // namespace fsa
