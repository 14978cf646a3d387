#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "lightsplice/random.hpp"
#include "lightsplice/raster.hpp"

namespace lightsplice::corpus {

// out = mask * fg + (1 - mask) * bg, clamped to [0,1].
ImageRGB composite(const ImageRGB& bg, const ImageRGB& fg, const SoftMask& mask);

// Gaussian blur with sigma = radius / 2 and replicate padding; radius 0 is
// the identity.
SoftMask feather_mask(const BinaryMask& mask, double radius);

// Bilinear resize to side x side. Images require side >= 8; masks are kept
// soft after resizing.
ImageRGB resize(const ImageRGB& image, int side);
SoftMask resize(const SoftMask& mask, int side);

enum class ShapeFamily { kRandom, kEllipse, kPolygon, kTexturedPatch };
enum class TextureFamily { kRandom, kLinearGradient, kPerlinNoise, kFlatVignette };

std::string to_string(ShapeFamily f);
std::string to_string(TextureFamily f);
ShapeFamily parse_shape_family(const std::string& s);
TextureFamily parse_texture_family(const std::string& s);

struct GenConfig {
  int height = 64;
  int width = 64;
  ShapeFamily shape = ShapeFamily::kRandom;
  TextureFamily texture = TextureFamily::kRandom;
  double min_area = 0.02;
  double max_area = 0.40;
  double feather_radius = 1.0;
  // Unedited objects rendered under the scene's own lighting.
  int max_distractors = 1;
  // Multiplicative ambient mismatch between the donor photo and the scene.
  double min_ambient_ratio = 1.25;
  double max_ambient_ratio = 1.6;
  // Sensor noise; one of scene/donor is drawn from the low band, the other
  // from the high band.
  double low_noise = 0.004;
  double high_noise = 0.03;

  nlohmann::json to_json() const;
  static GenConfig from_json(const nlohmann::json& j);
};

struct CompositeSample {
  // The scene photo the object is spliced into. For synthetic samples this
  // is also the unedited ("real") image.
  ImageRGB background;
  // Donor photo; only the masked region reaches the composite.
  ImageRGB foreground;
  SoftMask mask;
  ImageRGB composite;
  std::string sample_id;
  std::string source_tag = "synthetic";
};

// Deterministic in (rng state, config). Throws ArgumentError for canvases
// smaller than 16x16.
CompositeSample generate_synthetic_sample(Rng& rng, const GenConfig& config);

// Convenience: seeds a fresh stream per sample index.
CompositeSample generate_synthetic_sample(std::uint64_t seed, std::uint64_t index,
                                          const GenConfig& config);

// Fraction of pixels with mask >= 0.5.
double mask_area_fraction(const SoftMask& mask);

}  // namespace lightsplice::corpus
