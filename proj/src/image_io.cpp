#include "fsa/image_io.hpp"

#include "fsa/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace fsa {

void write_png(const Tensor& image, const std::filesystem::path& path) {
    if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
        throw ShapeError("write_png expects [1,H,W] or [3,H,W], got " + to_string(image.shape()));
    }
    const std::size_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
    std::vector<png_byte> pixels(channels * height * width);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            for (std::size_t c = 0; c < channels; ++c) {
                const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
                pixels[(y * width + x) * channels + c] = static_cast<png_byte>(std::lround(v * 255.0));
            }
        }
    }

    std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!file) throw IoError("cannot open " + path.string() + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed writing " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < height; ++y) png_write_row(png, pixels.data() + y * width * channels);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace fsa
