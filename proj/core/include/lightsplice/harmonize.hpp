#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lightsplice/corpus.hpp"
#include "lightsplice/random.hpp"
#include "lightsplice/raster.hpp"

namespace lightsplice::harmonize {

// Global photometric edit restricted to a mask. The identity element is
// brightness 0, contrast 1, saturation 1, unit gains.
struct FilterParams {
  double brightness = 0.0;              // additive, [-0.3, 0.3]
  double contrast = 1.0;                // about 0.5, [0.7, 1.3]
  double saturation = 1.0;              // about luma, [0.0, 1.5]
  std::array<double, 3> gains{1.0, 1.0, 1.0};  // per channel, [0.8, 1.2]

  static constexpr double kBrightnessMin = -0.3, kBrightnessMax = 0.3;
  static constexpr double kContrastMin = 0.7, kContrastMax = 1.3;
  static constexpr double kSaturationMin = 0.0, kSaturationMax = 1.5;
  static constexpr double kGainMin = 0.8, kGainMax = 1.2;

  bool in_range() const;
  void validate() const;  // ArgumentError when out of range
  bool is_identity() const;

  nlohmann::json to_json() const;
  static FilterParams from_json(const nlohmann::json& j);

  friend bool operator==(const FilterParams&, const FilterParams&) = default;
};

struct RecipePreset {
  std::string name;
  FilterParams params;
  std::array<double, 3> offsets{0.0, 0.0, 0.0};  // per channel, [-0.1, 0.1]
};

// warmer, cooler, brighter, darker, matte, vivid.
const std::vector<RecipePreset>& recipe_registry();
const RecipePreset& find_preset(const std::string& name);  // LookupError if unknown

struct ShadingTag {};
// Smooth luma estimate of the illumination; every value >= kShadingFloor.
using IlluminationField = Raster<1, ShadingTag>;
inline constexpr double kShadingFloor = 1e-3;

// Order: gains, saturation, contrast, brightness, clamp; blended by mask.
ImageRGB apply_filter_chain(const ImageRGB& image, const SoftMask& mask, const FilterParams& p);

struct FilterFit {
  FilterParams params;
  bool contrast_fallback = false;  // foreground luma was (nearly) constant
};

// Moment matching of the masked region against a background ring around it.
FilterFit fit_filter_params(const ImageRGB& composite, const SoftMask& mask, int ring_width = 8);

ImageRGB apply_recipe(const ImageRGB& image, const SoftMask& mask, const RecipePreset& preset);
ImageRGB apply_recipe(const ImageRGB& image, const SoftMask& mask, const std::string& preset_name);

IlluminationField estimate_shading(const ImageRGB& image, double sigma);

// Relight the masked region toward the shading implied by its surroundings:
// out = image * (S_bg / S_img)^strength inside the mask.
ImageRGB reshade(const ImageRGB& image, const SoftMask& mask, double sigma, double strength = 1.0,
                 int ring_width = 8);

// Background band of `width` pixels around the (binarized) mask.
BinaryMask ring_mask(const SoftMask& mask, int width);

enum class Method { kFilterChain, kRecipe, kPhysics, kNone };
enum class Mode { kRandom, kFit };

// Names double as directory names under harmonized/.
std::string to_string(Method m);
Method parse_method(const std::string& s);  // ArgumentError if unknown
std::string to_string(Mode m);
Mode parse_mode(const std::string& s);
inline constexpr std::array<Method, 3> kFamilies{Method::kFilterChain, Method::kRecipe,
                                                 Method::kPhysics};

// Sampling ranges for random mode; must lie inside the FilterParams ranges.
struct HarmonizeConfig {
  double brightness_min = -0.3, brightness_max = 0.3;
  double contrast_min = 0.7, contrast_max = 1.3;
  double saturation_min = 0.0, saturation_max = 1.5;
  double gain_min = 0.8, gain_max = 1.2;
  double physics_sigma_min = 2.0, physics_sigma_max = 8.0;
  double physics_strength_min = 0.6, physics_strength_max = 1.0;
  double fit_sigma = 4.0;
  int ring_width = 8;
  // Random draws whose mean |change| inside the mask is not above this are
  // redrawn (bounded by max_redraws).
  double min_effect = 1.0 / 255.0;
  int max_redraws = 16;

  void validate() const;
  nlohmann::json to_json() const;
  static HarmonizeConfig from_json(const nlohmann::json& j);
};

struct HarmonizedSample {
  corpus::CompositeSample base;
  ImageRGB harmonized;
  Method method = Method::kNone;
  nlohmann::json params_record = nlohmann::json::object();
};

// Image-level entry point: returns the harmonized image and its parameter
// record. `rng` is only consumed in random mode.
std::pair<ImageRGB, nlohmann::json> harmonize_image(const ImageRGB& composite, const SoftMask& mask,
                                                    Method method, Mode mode, Rng& rng,
                                                    const HarmonizeConfig& config = {});

HarmonizedSample harmonize(const corpus::CompositeSample& sample, Method method, Mode mode,
                           Rng& rng, const HarmonizeConfig& config = {});

// Mean absolute per-channel change over pixels with mask >= 0.5.
double masked_mean_abs_diff(const ImageRGB& a, const ImageRGB& b, const SoftMask& mask);

}  // namespace lightsplice::harmonize
