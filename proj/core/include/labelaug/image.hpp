#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace labelaug {

/// Grayscale image with 8- or 16-bit samples, row-major.
struct GrayImage {
    int height = 0;
    int width = 0;
    int bit_depth = 8;
    std::vector<std::uint16_t> pixels;

    GrayImage() = default;
    GrayImage(int h, int w, int depth = 8);

    std::uint16_t& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
    std::uint16_t at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }
    double max_value() const { return bit_depth == 16 ? 65535.0 : 255.0; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<Rgb> pixels;

    RgbImage() = default;
    RgbImage(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w) {}
    Rgb& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
    const Rgb& at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }
};

/// Reads 8/16-bit grayscale PNG (alpha is dropped, colour is converted to gray).
/// Throws DataError on unreadable input.
GrayImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const GrayImage& image);
void write_png(const std::filesystem::path& path, const RgbImage& image);

}  // namespace labelaug
