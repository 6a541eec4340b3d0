#include "fsa/dataset.hpp"

#include "fsa/errors.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

namespace fsa {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::string hex(std::uint32_t v) {
    std::ostringstream os;
    os << "0x" << std::hex << std::setw(8) << std::setfill('0') << v;
    return os.str();
}

void check_magic(const std::vector<std::uint8_t>& bytes, std::uint32_t expected, const std::filesystem::path& path,
                 std::size_t header) {
    if (bytes.size() < 4) throw FormatError(path.string() + ": file shorter than the IDX magic");
    const std::uint32_t magic = read_be32(bytes, 0);
    if (magic != expected) {
        throw FormatError(path.string() + ": IDX magic " + hex(magic) + ", expected " + hex(expected));
    }
    if (bytes.size() < header) throw FormatError(path.string() + ": file shorter than the IDX header");
}

void put_be32(std::ofstream& out, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                           static_cast<char>(v)};
    out.write(bytes, 4);
}

} // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    const auto image_bytes = read_file(images_path);
    const auto label_bytes = read_file(labels_path);
    check_magic(image_bytes, kIdxImageMagic, images_path, 16);
    check_magic(label_bytes, kIdxLabelMagic, labels_path, 8);

    const std::uint32_t count = read_be32(image_bytes, 4);
    const std::uint32_t rows = read_be32(image_bytes, 8);
    const std::uint32_t cols = read_be32(image_bytes, 12);
    const std::uint32_t label_count = read_be32(label_bytes, 4);
    if (rows == 0 || cols == 0) throw FormatError(images_path.string() + ": zero image extent");
    const std::size_t plane = std::size_t{rows} * cols;
    if (image_bytes.size() != 16 + plane * count) {
        throw FormatError(images_path.string() + ": expected " + std::to_string(16 + plane * count) + " bytes, found " +
                          std::to_string(image_bytes.size()));
    }
    if (label_bytes.size() != 8 + std::size_t{label_count}) {
        throw FormatError(labels_path.string() + ": expected " + std::to_string(8 + std::size_t{label_count}) +
                          " bytes, found " + std::to_string(label_bytes.size()));
    }
    if (label_count != count) {
        throw ConsistencyError("image file holds " + std::to_string(count) + " images but label file holds " +
                               std::to_string(label_count) + " labels");
    }

    Dataset data;
    data.name = images_path.filename().string();
    data.images.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<double> values(plane);
        const std::uint8_t* src = image_bytes.data() + 16 + i * plane;
        for (std::size_t j = 0; j < plane; ++j) values[j] = static_cast<double>(src[j]) / 255.0;
        const std::size_t label = label_bytes[8 + i];
        data.class_count = std::max(data.class_count, label + 1);
        data.images.push_back({Tensor({1, rows, cols}, std::move(values)), label});
    }
    return data;
}

void write_idx_images(const std::filesystem::path& path, std::span<const std::uint8_t> pixels, std::uint32_t count,
                      std::uint32_t rows, std::uint32_t cols) {
    if (pixels.size() != std::size_t{count} * rows * cols) throw ArgumentError("pixel buffer size mismatch");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    put_be32(out, kIdxImageMagic);
    put_be32(out, count);
    put_be32(out, rows);
    put_be32(out, cols);
    out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    put_be32(out, kIdxLabelMagic);
    put_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

Dataset head(const Dataset& data, std::size_t limit) {
    if (limit == 0 || limit >= data.images.size()) return data;
    Dataset out{{data.images.begin(), data.images.begin() + static_cast<std::ptrdiff_t>(limit)}, data.name,
                data.class_count};
    return out;
}

} // namespace fsa
