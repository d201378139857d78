#include "ict/degrade.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "ict/errors.hpp"
#include "ict/rng.hpp"

namespace ict {

namespace {

void check_severity(int severity) {
    if (severity < 1 || severity > 5)
        throw ContractError("degradation severity must be in 1..5, got " +
                            std::to_string(severity));
}

}  // namespace

double noise_sigma_for_severity(int severity) {
    check_severity(severity);
    static constexpr double t[5] = {5, 10, 15, 20, 25};
    return t[severity - 1];
}

double blur_sigma_for_severity(int severity) {
    check_severity(severity);
    static constexpr double t[5] = {0.5, 1.0, 2.0, 3.0, 4.0};
    return t[severity - 1];
}

int pixelation_block_for_severity(int severity) {
    check_severity(severity);
    static constexpr int t[5] = {2, 4, 6, 8, 10};
    return t[severity - 1];
}

int jpeg_quality_for_severity(int severity) {
    check_severity(severity);
    static constexpr int t[5] = {90, 70, 50, 30, 20};
    return t[severity - 1];
}

DegradationKind degradation_kind_from_name(const std::string& name) {
    if (name == "gaussian_noise") return DegradationKind::gaussian_noise;
    if (name == "gaussian_blur") return DegradationKind::gaussian_blur;
    if (name == "pixelation") return DegradationKind::pixelation;
    if (name == "jpeg_quant") return DegradationKind::jpeg_quant;
    throw ContractError("unknown degradation kind: " + name);
}

std::string degradation_kind_name(DegradationKind kind) {
    switch (kind) {
        case DegradationKind::gaussian_noise: return "gaussian_noise";
        case DegradationKind::gaussian_blur: return "gaussian_blur";
        case DegradationKind::pixelation: return "pixelation";
        case DegradationKind::jpeg_quant: return "jpeg_quant";
    }
    throw ContractError("unknown degradation kind enum");
}

Image8 add_gaussian_noise(const Image8& img, double sigma, std::uint64_t seed) {
    Rng rng(seed);
    Image8 out = img;
    for (auto& b : out.pixels) {
        const double v = b + sigma * rng.normal();
        b = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l));
    }
    return out;
}

Image8 gaussian_blur_image(const Image8& img, double sigma) {
    if (sigma < 0.05) return img;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * (i / sigma) * (i / sigma));
        ksum += kernel[static_cast<std::size_t>(i + radius)];
    }
    for (auto& k : kernel) k /= ksum;

    const int w = img.width, h = img.height;
    // replicate border so constant images stay fixed points
    std::vector<double> tmp(static_cast<std::size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < 3; ++ch) {
                double s = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int xx = std::clamp(x + i, 0, w - 1);
                    s += kernel[static_cast<std::size_t>(i + radius)] * img.at(xx, y, ch);
                }
                tmp[(static_cast<std::size_t>(y) * w + x) * 3 + ch] = s;
            }
    Image8 out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < 3; ++ch) {
                double s = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int yy = std::clamp(y + i, 0, h - 1);
                    s += kernel[static_cast<std::size_t>(i + radius)] *
                         tmp[(static_cast<std::size_t>(yy) * w + x) * 3 + ch];
                }
                out.at(x, y, ch) = static_cast<std::uint8_t>(std::clamp(std::lround(s), 0l, 255l));
            }
    return out;
}

Image8 pixelate(const Image8& img, int block) {
    if (block < 1) throw ContractError("pixelate: block must be >= 1");
    if (block == 1) return img;
    Image8 out(img.width, img.height);
    for (int by = 0; by < img.height; by += block)
        for (int bx = 0; bx < img.width; bx += block) {
            const int x1 = std::min(bx + block, img.width);
            const int y1 = std::min(by + block, img.height);
            for (int ch = 0; ch < 3; ++ch) {
                long sum = 0;
                for (int y = by; y < y1; ++y)
                    for (int x = bx; x < x1; ++x) sum += img.at(x, y, ch);
                const int count = (x1 - bx) * (y1 - by);
                const std::uint8_t v = static_cast<std::uint8_t>(
                    std::clamp(std::lround(static_cast<double>(sum) / count), 0l, 255l));
                for (int y = by; y < y1; ++y)
                    for (int x = bx; x < x1; ++x) out.at(x, y, ch) = v;
            }
        }
    return out;
}

namespace {

// Annex-K base quantization tables.
constexpr int kLumaQ[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

constexpr int kChromaQ[64] = {
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

std::array<double, 64> scaled_table(const int* base, int quality) {
    quality = std::clamp(quality, 1, 100);
    const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    std::array<double, 64> t{};
    for (int i = 0; i < 64; ++i)
        t[static_cast<std::size_t>(i)] =
            std::clamp((base[i] * scale + 50) / 100, 1, 255);
    return t;
}

struct Dct8 {
    double c[8][8];  // orthonormal DCT-II basis
    Dct8() {
        constexpr double kPi = 3.14159265358979323846;
        for (int u = 0; u < 8; ++u) {
            const double a = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int x = 0; x < 8; ++x) c[u][x] = a * std::cos((2 * x + 1) * u * kPi / 16.0);
        }
    }
};

const Dct8& dct8() {
    static const Dct8 d;
    return d;
}

// In-place quantization round-trip of one padded plane.
void quantize_plane(std::vector<double>& plane, int pw, int ph,
                    const std::array<double, 64>& q) {
    const auto& d = dct8();
    double block[8][8], tmp[8][8], coef[8][8];
    for (int by = 0; by < ph; by += 8)
        for (int bx = 0; bx < pw; bx += 8) {
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    block[y][x] = plane[static_cast<std::size_t>(by + y) * pw + bx + x] - 128.0;
            // coef = C * block * C^T
            for (int u = 0; u < 8; ++u)
                for (int x = 0; x < 8; ++x) {
                    double s = 0.0;
                    for (int y = 0; y < 8; ++y) s += d.c[u][y] * block[y][x];
                    tmp[u][x] = s;
                }
            for (int u = 0; u < 8; ++u)
                for (int v = 0; v < 8; ++v) {
                    double s = 0.0;
                    for (int x = 0; x < 8; ++x) s += tmp[u][x] * d.c[v][x];
                    const double qv = q[static_cast<std::size_t>(u * 8 + v)];
                    coef[u][v] = std::round(s / qv) * qv;
                }
            // block = C^T * coef * C
            for (int y = 0; y < 8; ++y)
                for (int v = 0; v < 8; ++v) {
                    double s = 0.0;
                    for (int u = 0; u < 8; ++u) s += d.c[u][y] * coef[u][v];
                    tmp[y][v] = s;
                }
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) {
                    double s = 0.0;
                    for (int v = 0; v < 8; ++v) s += tmp[y][v] * d.c[v][x];
                    plane[static_cast<std::size_t>(by + y) * pw + bx + x] = s + 128.0;
                }
        }
}

}  // namespace

Image8 jpeg_roundtrip(const Image8& img, int quality) {
    const int w = img.width, h = img.height;
    const int pw = (w + 7) / 8 * 8, ph = (h + 7) / 8 * 8;

    // JFIF full-range YCbCr, kept in doubles end to end
    std::vector<double> Y(static_cast<std::size_t>(pw) * ph), Cb(Y.size()), Cr(Y.size());
    for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x) {
            const int sx = std::min(x, w - 1), sy = std::min(y, h - 1);  // edge replicate pad
            const double r = img.at(sx, sy, 0), g = img.at(sx, sy, 1), b = img.at(sx, sy, 2);
            const std::size_t i = static_cast<std::size_t>(y) * pw + x;
            Y[i] = 0.299 * r + 0.587 * g + 0.114 * b;
            Cb[i] = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0;
            Cr[i] = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0;
        }

    const auto luma = scaled_table(kLumaQ, quality);
    const auto chroma = scaled_table(kChromaQ, quality);
    quantize_plane(Y, pw, ph, luma);
    quantize_plane(Cb, pw, ph, chroma);
    quantize_plane(Cr, pw, ph, chroma);

    Image8 out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * pw + x;
            const double cb = Cb[i] - 128.0, cr = Cr[i] - 128.0;
            const double r = Y[i] + 1.402 * cr;
            const double g = Y[i] - 0.344136 * cb - 0.714136 * cr;
            const double b = Y[i] + 1.772 * cb;
            out.at(x, y, 0) = static_cast<std::uint8_t>(std::clamp(std::lround(r), 0l, 255l));
            out.at(x, y, 1) = static_cast<std::uint8_t>(std::clamp(std::lround(g), 0l, 255l));
            out.at(x, y, 2) = static_cast<std::uint8_t>(std::clamp(std::lround(b), 0l, 255l));
        }
    return out;
}

FaceImage degrade(const FaceImage& face, const DegradationSpec& spec, std::uint64_t seed) {
    FaceImage out = face;
    switch (spec.kind) {
        case DegradationKind::gaussian_noise:
            out.image = add_gaussian_noise(face.image, noise_sigma_for_severity(spec.severity), seed);
            break;
        case DegradationKind::gaussian_blur:
            out.image = gaussian_blur_image(face.image, blur_sigma_for_severity(spec.severity));
            break;
        case DegradationKind::pixelation:
            out.image = pixelate(face.image, pixelation_block_for_severity(spec.severity));
            break;
        case DegradationKind::jpeg_quant:
            out.image = jpeg_roundtrip(face.image, jpeg_quality_for_severity(spec.severity));
            break;
    }
    return out;
}

}  // namespace ict
