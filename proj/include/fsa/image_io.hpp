#pragma once

#include "fsa/tensor.hpp"

#include <filesystem>

namespace fsa {

/// Writes a [1,H,W] or [3,H,W] tensor in [0,1] as an 8-bit PNG, rounding each
/// value to the nearest of 256 levels.
void write_png(const Tensor& image, const std::filesystem::path& path);

} // namespace fsa
