#pragma once

#include "fsa/tensor.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <string_view>

namespace fsa {

/// Normalization of the 1-D DCT-II basis.
///
/// Ortho: orthonormal rows, sqrt(1/N) for the DC row and sqrt(2/N) otherwise.
///
/// PaperLiteral: every row carries the same prefactor (2N)^(-1/4), so a
/// square N x N image gets the 2-D prefactor 1/sqrt(2N) with unit C(u), C(v).
/// The DC row is longer than the others by sqrt(2), which makes the basis
/// non-orthogonal up to scale; the inverse is the exact matrix inverse.
enum class DctMode { Ortho, PaperLiteral };

std::string_view to_string(DctMode mode);
std::optional<DctMode> parse_dct_mode(std::string_view text);

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Precomputed basis for one transform length and normalization.
class DctPlan {
public:
    DctPlan(std::size_t length, DctMode mode);

    /// Shared immutable plan, built once per (length, mode). Thread-safe.
    static const DctPlan& cached(std::size_t length, DctMode mode);

    std::size_t length() const noexcept { return length_; }
    DctMode mode() const noexcept { return mode_; }
    /// Row u holds the cosine basis vector of frequency u.
    const Matrix& forward() const noexcept { return forward_; }
    const Matrix& inverse() const noexcept { return inverse_; }
    const Matrix& inverse_transpose() const noexcept { return inverse_transpose_; }

private:
    std::size_t length_;
    DctMode mode_;
    Matrix forward_;
    Matrix inverse_;
    Matrix inverse_transpose_;
};

/// Separable 2-D DCT of every channel of a [C,H,W] tensor.
Tensor dct2(const Tensor& image, DctMode mode);

/// Inverse of dct2 under the same mode.
Tensor idct2(const Tensor& coeffs, DctMode mode);

/// Spatial image of the loss gradient taken with respect to the DCT
/// coefficients: idct2 applied to the chain-rule gradient through
/// x = idct2(coeffs). Per channel and with A = inverse(), this is
/// A_H (A_H^T g A_W) A_W^T.
///
/// Entries whose magnitude is at most 1e-12 of the largest |g| are flushed to
/// exactly zero, so under Ortho mode sign(frequency_pullback(g)) == sign(g)
/// also holds at coordinates where g is exactly zero.
Tensor frequency_pullback(const Tensor& gradient, DctMode mode);

} // namespace fsa
