#pragma once

#include <lsr/error.hpp>
#include <lsr/image.hpp>

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lsr {

/// Intensity to 8-bit code, round to nearest.
inline std::uint8_t quantize_intensity(float v)
{
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

/// Decoded value of an 8-bit code; matches read_png exactly.
inline float dequantize_intensity(std::uint8_t code) { return static_cast<float>(code / 255.0); }

/// Writes an 8-bit grayscale PNG.
inline void write_png(const std::filesystem::path& path, const GrayImage& img)
{
    std::vector<png_byte> buffer(static_cast<std::size_t>(img.width()) * static_cast<std::size_t>(img.height()));
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        buffer[i] = quantize_intensity(img.data()[i]);
    }
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw IoError("cannot write " + path.string() + ": " + msg);
    }
}

/// Reads a PNG as grayscale in [0,1]. Color images are converted with
/// Rec. 601 luma; alpha is dropped.
inline GrayImage read_png(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) {
        throw IoError("cannot open " + path.string());
    }
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        throw MalformedFile(path.string() + ": " + image.message);
    }
    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const int channels = color ? 3 : 1;
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
    png_color background{0, 0, 0};
    if (!png_image_finish_read(&image, &background, buffer.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw MalformedFile(path.string() + ": " + msg);
    }
    const int width = static_cast<int>(image.width);
    const int height = static_cast<int>(image.height);
    std::vector<float> data(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
    for (std::size_t i = 0; i < data.size(); ++i) {
        const png_byte* px = &buffer[i * static_cast<std::size_t>(channels)];
        if (color) {
            const double luma = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
            data[i] = static_cast<float>(std::min(1.0, luma / 255.0));
        } else {
            data[i] = dequantize_intensity(px[0]);
        }
    }
    return GrayImage(width, height, std::move(data));
}

} // namespace lsr
