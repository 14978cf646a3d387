#pragma once

#include <filesystem>

#include "lightsplice/raster.hpp"

namespace lightsplice {

// Decode a PNG or JPEG into [0,1] RGB (v/255, no gamma handling). Grayscale
// inputs are replicated to three channels.
ImageRGB load_image(const std::filesystem::path& path);

// Decode a single-channel mask; colour inputs are reduced to luma.
SoftMask load_mask(const std::filesystem::path& path);

// Load an 8-bit score image: 0 -> 0.0, 255 -> 1.0.
ScoreMap load_score_png(const std::filesystem::path& path);

// 8-bit PNG writers; values are clamped to [0,1] and rounded to v*255.
void save_png(const std::filesystem::path& path, const ImageRGB& img);
void save_png(const std::filesystem::path& path, const SoftMask& mask);
void save_png(const std::filesystem::path& path, const ScoreMap& scores);

// Round-trip an image through 8-bit quantization without touching disk.
ImageRGB quantize8(const ImageRGB& img);
SoftMask quantize8(const SoftMask& mask);

}  // namespace lightsplice
