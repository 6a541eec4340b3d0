#pragma once

#include "fsa/model.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace fsa {

/// Binary weight file layout (all integers little-endian u32 unless noted):
///
///   "FSAW"  u8 version(=1)
///   input rank, input extents...
///   layer count
///   per layer:
///     u8 tag (1 conv2d, 2 linear, 3 relu, 4 maxpool2d, 5 flatten)
///     parameter count, parameters...   conv2d: stride, padding; maxpool2d: size
///     tensor count                      conv2d/linear: 2 (weights, bias)
///     per tensor: rank, extents..., then values as little-endian IEEE-754 f64
///
/// Loading a saved file reproduces the classifier bit for bit.
std::string serialize_weights(const Classifier& model);

/// Throws ParseError naming the offending section for truncated or malformed
/// input, and ShapeError when the declared shapes do not compose.
Classifier parse_weights(std::string_view bytes);

void save_weights(const Classifier& model, const std::filesystem::path& path);
Classifier load_weights(const std::filesystem::path& path);

} // namespace fsa
