#pragma once

#include <cstdint>
#include <string>

#include "ict/face_synth.hpp"
#include "ict/image.hpp"

namespace ict {

enum class DegradationKind { gaussian_noise, gaussian_blur, pixelation, jpeg_quant };

// Severity 1..5 maps into the parameter tables below.
struct DegradationSpec {
    DegradationKind kind = DegradationKind::gaussian_noise;
    int severity = 1;
};

// severity ->   1    2    3    4    5
// noise sigma   5   10   15   20   25   (additive, on the 0..255 scale)
// blur sigma  0.5  1.0  2.0  3.0  4.0   (px)
// pixel block   2    4    6    8   10
// jpeg quality 90   70   50   30   20
double noise_sigma_for_severity(int severity);
double blur_sigma_for_severity(int severity);
int pixelation_block_for_severity(int severity);
int jpeg_quality_for_severity(int severity);

DegradationKind degradation_kind_from_name(const std::string& name);
std::string degradation_kind_name(DegradationKind kind);

Image8 add_gaussian_noise(const Image8& img, double sigma, std::uint64_t seed);
Image8 gaussian_blur_image(const Image8& img, double sigma);
// block = 1 is the identity
Image8 pixelate(const Image8& img, int block);
// RGB -> YCbCr -> per 8x8 block DCT, quantize with the standard luminance /
// chrominance tables scaled by quality, dequantize, inverse DCT -> RGB.
// No entropy coding: the quantization round-trip is the whole degradation.
Image8 jpeg_roundtrip(const Image8& img, int quality);

// Dispatcher; landmarks and identity label pass through untouched.
FaceImage degrade(const FaceImage& face, const DegradationSpec& spec, std::uint64_t seed);

}  // namespace ict
