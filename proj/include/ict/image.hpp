#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ict {

// 8-bit RGB raster, row-major, channel-interleaved.
struct Image8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    Image8() = default;
    Image8(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

    std::uint8_t at(int x, int y, int ch) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + ch];
    }
    std::uint8_t& at(int x, int y, int ch) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + ch];
    }
    bool same_size(const Image8& o) const { return width == o.width && height == o.height; }
};

// Grayscale float raster in [0,1]; used for swap masks and heat maps.
struct MaskImage {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    MaskImage() = default;
    MaskImage(int w, int h, double fill = 0.0)
        : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
};

// Binary PPM (P6), 8-bit, the interchange format for all face images.
void write_ppm(const Image8& img, const std::string& path);
Image8 read_ppm(const std::string& path);

// Binary PGM (P5); mask values quantized to 0..255 (255 = inner region).
void write_pgm(const MaskImage& mask, const std::string& path);
MaskImage read_pgm(const std::string& path);

}  // namespace ict
