#pragma once

#include "fsa/model.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fsa {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct Dataset {
    std::vector<LabeledImage> images;
    std::string name;
    std::size_t class_count = 0;
};

/// Reads a big-endian IDX image file (magic 0x00000803, dims n,rows,cols) and
/// the matching label file (magic 0x00000801). Pixels are scaled from bytes to
/// [0,1] and stored as [1,rows,cols]; class_count is one more than the largest label.
///
/// Throws IoError when a file cannot be read, FormatError on a wrong magic or
/// short file, and ConsistencyError when the two files disagree on the count.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Writers for the same format; `pixels` holds n*rows*cols bytes.
void write_idx_images(const std::filesystem::path& path, std::span<const std::uint8_t> pixels, std::uint32_t count,
                      std::uint32_t rows, std::uint32_t cols);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

/// First `limit` images (all when limit is 0 or exceeds the size).
Dataset head(const Dataset& data, std::size_t limit);

} // namespace fsa
