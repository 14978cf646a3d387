#include "lightsplice/harmonize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lightsplice/error.hpp"
#include "lightsplice/filters.hpp"

namespace lightsplice::harmonize {

namespace {

bool within(double v, double lo, double hi) { return v >= lo && v <= hi; }

void check_shapes(const ImageRGB& image, const SoftMask& mask, const char* op) {
  if (!image.same_shape(mask)) {
    throw DimensionError(std::string(op) + ": image and mask shapes differ");
  }
}

// Foreground transform of one pixel in the fixed filter order.
std::array<double, 3> filter_pixel(std::array<double, 3> v, const FilterParams& p) {
  if (p.gains != std::array<double, 3>{1.0, 1.0, 1.0}) {
    for (int c = 0; c < 3; ++c) v[c] *= p.gains[c];
  }
  if (p.saturation != 1.0) {
    const double y = luma(v[0], v[1], v[2]);
    for (int c = 0; c < 3; ++c) v[c] = y + p.saturation * (v[c] - y);
  }
  if (p.contrast != 1.0) {
    for (int c = 0; c < 3; ++c) v[c] = 0.5 + p.contrast * (v[c] - 0.5);
  }
  if (p.brightness != 0.0) {
    for (int c = 0; c < 3; ++c) v[c] += p.brightness;
  }
  for (double& x : v) x = std::clamp(x, 0.0, 1.0);
  return v;
}

template <class F>
ImageRGB apply_masked(const ImageRGB& image, const SoftMask& mask, F&& transform) {
  ImageRGB out = image;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const double m = mask.at(y, x);
      if (m <= 0.0) continue;
      const std::array<double, 3> src{image.at(y, x, 0), image.at(y, x, 1), image.at(y, x, 2)};
      const std::array<double, 3> dst = transform(src, y, x);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = blend_value(src[c], dst[c], m);
    }
  }
  return out;
}

struct RegionStats {
  std::size_t count = 0;
  std::array<double, 3> mean{};
  double luma_mean = 0.0;
  double luma_std = 0.0;
};

RegionStats region_stats(const ImageRGB& img, const BinaryMask& region) {
  RegionStats s;
  double sum_y = 0.0, sum_yy = 0.0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (region.at(y, x) < 0.5) continue;
      ++s.count;
      for (int c = 0; c < 3; ++c) s.mean[c] += img.at(y, x, c);
      const double l = luma(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
      sum_y += l;
      sum_yy += l * l;
    }
  }
  if (s.count == 0) return s;
  const double n = static_cast<double>(s.count);
  for (double& m : s.mean) m /= n;
  s.luma_mean = sum_y / n;
  s.luma_std = std::sqrt(std::max(0.0, sum_yy / n - s.luma_mean * s.luma_mean));
  return s;
}

}  // namespace

bool FilterParams::in_range() const {
  if (!within(brightness, kBrightnessMin, kBrightnessMax)) return false;
  if (!within(contrast, kContrastMin, kContrastMax)) return false;
  if (!within(saturation, kSaturationMin, kSaturationMax)) return false;
  return std::all_of(gains.begin(), gains.end(), [](double g) { return within(g, kGainMin, kGainMax); });
}

void FilterParams::validate() const {
  if (!in_range()) throw ArgumentError("filter parameters out of range: " + to_json().dump());
}

bool FilterParams::is_identity() const { return *this == FilterParams{}; }

nlohmann::json FilterParams::to_json() const {
  return {{"brightness", brightness},
          {"contrast", contrast},
          {"saturation", saturation},
          {"gains", gains}};
}

FilterParams FilterParams::from_json(const nlohmann::json& j) {
  FilterParams p;
  p.brightness = j.at("brightness").get<double>();
  p.contrast = j.at("contrast").get<double>();
  p.saturation = j.at("saturation").get<double>();
  p.gains = j.at("gains").get<std::array<double, 3>>();
  return p;
}

const std::vector<RecipePreset>& recipe_registry() {
  static const std::vector<RecipePreset> registry = [] {
    std::vector<RecipePreset> r;
    r.push_back({"warmer", FilterParams{}, {0.05, 0.0, -0.05}});
    r.push_back({"cooler", FilterParams{}, {-0.05, 0.0, 0.05}});
    r.push_back({"brighter", FilterParams{0.1, 1.05, 1.0, {1.0, 1.0, 1.0}}, {0.0, 0.0, 0.0}});
    r.push_back({"darker", FilterParams{-0.1, 0.95, 1.0, {1.0, 1.0, 1.0}}, {0.0, 0.0, 0.0}});
    r.push_back({"matte", FilterParams{0.03, 0.8, 0.85, {1.0, 1.0, 1.0}}, {0.0, 0.0, 0.0}});
    r.push_back({"vivid", FilterParams{0.0, 1.15, 1.3, {1.0, 1.0, 1.0}}, {0.0, 0.0, 0.0}});
    return r;
  }();
  return registry;
}

const RecipePreset& find_preset(const std::string& name) {
  for (const auto& p : recipe_registry()) {
    if (p.name == name) return p;
  }
  throw LookupError("unknown recipe preset '" + name + "'");
}

ImageRGB apply_filter_chain(const ImageRGB& image, const SoftMask& mask, const FilterParams& p) {
  check_shapes(image, mask, "apply_filter_chain");
  p.validate();
  if (p.is_identity()) return image;
  return apply_masked(image, mask, [&](std::array<double, 3> v, int, int) { return filter_pixel(v, p); });
}

BinaryMask ring_mask(const SoftMask& mask, int width) {
  if (width < 1) throw ArgumentError("ring width must be >= 1");
  const BinaryMask fg = binarize(mask);
  const BinaryMask grown = dilate(fg, width);
  BinaryMask ring(mask.height(), mask.width());
  auto g = grown.values();
  auto f = fg.values();
  auto r = ring.values();
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = g[i] > 0.5 && f[i] < 0.5 ? 1.0 : 0.0;
  return ring;
}

FilterFit fit_filter_params(const ImageRGB& composite, const SoftMask& mask, int ring_width) {
  check_shapes(composite, mask, "fit_filter_params");
  const RegionStats fg = region_stats(composite, binarize(mask));
  const RegionStats ring = region_stats(composite, ring_mask(mask, ring_width));
  if (fg.count < 16) throw ArgumentError("fit_filter_params: mask has fewer than 16 foreground pixels");
  if (ring.count < 16) throw ArgumentError("fit_filter_params: background ring has fewer than 16 pixels");

  FilterFit fit;
  FilterParams& p = fit.params;
  if (fg.luma_std < 1e-4) {
    fit.contrast_fallback = true;
    p.contrast = 1.0;
  } else {
    p.contrast = std::clamp(ring.luma_std / fg.luma_std, FilterParams::kContrastMin, FilterParams::kContrastMax);
  }
  p.brightness = std::clamp(ring.luma_mean - 0.5 - p.contrast * (fg.luma_mean - 0.5),
                            FilterParams::kBrightnessMin, FilterParams::kBrightnessMax);
  p.saturation = 1.0;
  if (fg.luma_mean > 1e-6 && ring.luma_mean > 1e-6) {
    const double luma_ratio = ring.luma_mean / fg.luma_mean;
    for (int c = 0; c < 3; ++c) {
      if (fg.mean[c] > 1e-6) {
        p.gains[c] = std::clamp(ring.mean[c] / fg.mean[c] / luma_ratio, FilterParams::kGainMin,
                                FilterParams::kGainMax);
      }
    }
  }
  return fit;
}

ImageRGB apply_recipe(const ImageRGB& image, const SoftMask& mask, const RecipePreset& preset) {
  check_shapes(image, mask, "apply_recipe");
  preset.params.validate();
  for (double o : preset.offsets) {
    if (!within(o, -0.1, 0.1)) throw ArgumentError("recipe offset out of range in '" + preset.name + "'");
  }
  return apply_masked(image, mask, [&](std::array<double, 3> v, int, int) {
    auto out = preset.params.is_identity() ? v : filter_pixel(v, preset.params);
    for (int c = 0; c < 3; ++c) {
      if (preset.offsets[c] != 0.0) out[c] = std::clamp(out[c] + preset.offsets[c], 0.0, 1.0);
    }
    return out;
  });
}

ImageRGB apply_recipe(const ImageRGB& image, const SoftMask& mask, const std::string& preset_name) {
  return apply_recipe(image, mask, find_preset(preset_name));
}

IlluminationField estimate_shading(const ImageRGB& image, double sigma) {
  if (!(sigma > 0.0)) throw ArgumentError("estimate_shading: sigma must be > 0");
  IlluminationField s = gaussian_blur(luma_plane<ShadingTag>(image), sigma);
  for (double& v : s.values()) v = std::max(v, kShadingFloor);
  return s;
}

ImageRGB reshade(const ImageRGB& image, const SoftMask& mask, double sigma, double strength,
                 int ring_width) {
  check_shapes(image, mask, "reshade");
  if (!(sigma > 0.0)) throw ArgumentError("reshade: sigma must be > 0");
  if (std::none_of(mask.values().begin(), mask.values().end(), [](double v) { return v > 0.0; })) {
    throw ArgumentError("reshade: mask is empty");
  }
  const auto lum = luma_plane<ShadingTag>(image);
  // Fill the masked region with the mean luma of its surroundings.
  RegionStats ring = region_stats(image, ring_mask(mask, ring_width));
  if (ring.count == 0) {
    BinaryMask outside(mask.height(), mask.width());
    for (std::size_t i = 0; i < outside.size(); ++i) outside.values()[i] = mask.values()[i] < 0.5 ? 1.0 : 0.0;
    ring = region_stats(image, outside);
  }
  const double fill = ring.count > 0 ? ring.luma_mean : mean_value(lum.values());
  IlluminationField filled = lum;
  for (std::size_t i = 0; i < filled.size(); ++i) {
    filled.values()[i] = blend_value(lum.values()[i], fill, mask.values()[i]);
  }
  const auto taps = gaussian_kernel(sigma);
  IlluminationField s_img = convolve_separable(lum, taps);
  IlluminationField s_bg = convolve_separable(filled, taps);
  for (double& v : s_img.values()) v = std::max(v, kShadingFloor);
  for (double& v : s_bg.values()) v = std::max(v, kShadingFloor);

  return apply_masked(image, mask, [&](std::array<double, 3> v, int y, int x) {
    double ratio = s_bg.at(y, x) / s_img.at(y, x);
    if (strength != 1.0) ratio = std::pow(ratio, strength);
    if (ratio == 1.0) return v;
    for (double& c : v) c = std::clamp(c * ratio, 0.0, 1.0);
    return v;
  });
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kFilterChain: return "filter_chain";
    case Method::kRecipe: return "recipe";
    case Method::kPhysics: return "physics";
    case Method::kNone: return "none";
  }
  return "none";
}

Method parse_method(const std::string& s) {
  for (auto m : {Method::kFilterChain, Method::kRecipe, Method::kPhysics, Method::kNone}) {
    if (to_string(m) == s) return m;
  }
  throw ArgumentError("unknown harmonization method '" + s + "'");
}

std::string to_string(Mode m) { return m == Mode::kRandom ? "random" : "fit"; }

Mode parse_mode(const std::string& s) {
  if (s == "random") return Mode::kRandom;
  if (s == "fit") return Mode::kFit;
  throw ArgumentError("unknown harmonization mode '" + s + "'");
}

void HarmonizeConfig::validate() const {
  auto inside = [](double lo, double hi, double a, double b) { return lo <= hi && lo >= a && hi <= b; };
  if (!inside(brightness_min, brightness_max, FilterParams::kBrightnessMin, FilterParams::kBrightnessMax) ||
      !inside(contrast_min, contrast_max, FilterParams::kContrastMin, FilterParams::kContrastMax) ||
      !inside(saturation_min, saturation_max, FilterParams::kSaturationMin, FilterParams::kSaturationMax) ||
      !inside(gain_min, gain_max, FilterParams::kGainMin, FilterParams::kGainMax)) {
    throw ConfigError("harmonize config: sampling ranges must lie inside the filter parameter ranges");
  }
  if (!(physics_sigma_min > 0.0 && physics_sigma_min <= physics_sigma_max) ||
      !(physics_strength_min >= 0.0 && physics_strength_min <= physics_strength_max) ||
      !(fit_sigma > 0.0) || ring_width < 1 || max_redraws < 0) {
    throw ConfigError("harmonize config: invalid physics/ring settings");
  }
}

nlohmann::json HarmonizeConfig::to_json() const {
  return {{"brightness", {brightness_min, brightness_max}},
          {"contrast", {contrast_min, contrast_max}},
          {"saturation", {saturation_min, saturation_max}},
          {"gain", {gain_min, gain_max}},
          {"physics_sigma", {physics_sigma_min, physics_sigma_max}},
          {"physics_strength", {physics_strength_min, physics_strength_max}},
          {"fit_sigma", fit_sigma},
          {"ring_width", ring_width},
          {"min_effect", min_effect},
          {"max_redraws", max_redraws}};
}

HarmonizeConfig HarmonizeConfig::from_json(const nlohmann::json& j) {
  HarmonizeConfig c;
  auto range = [](const nlohmann::json& v, double& lo, double& hi) {
    const auto r = v.get<std::array<double, 2>>();
    lo = r[0];
    hi = r[1];
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "brightness") range(v, c.brightness_min, c.brightness_max);
    else if (key == "contrast") range(v, c.contrast_min, c.contrast_max);
    else if (key == "saturation") range(v, c.saturation_min, c.saturation_max);
    else if (key == "gain") range(v, c.gain_min, c.gain_max);
    else if (key == "physics_sigma") range(v, c.physics_sigma_min, c.physics_sigma_max);
    else if (key == "physics_strength") range(v, c.physics_strength_min, c.physics_strength_max);
    else if (key == "fit_sigma") c.fit_sigma = v.get<double>();
    else if (key == "ring_width") c.ring_width = v.get<int>();
    else if (key == "min_effect") c.min_effect = v.get<double>();
    else if (key == "max_redraws") c.max_redraws = v.get<int>();
    else throw ConfigError("unknown harmonize config key '" + key + "'");
  }
  c.validate();
  return c;
}

double masked_mean_abs_diff(const ImageRGB& a, const ImageRGB& b, const SoftMask& mask) {
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (mask.at(y, x) < 0.5) continue;
      for (int c = 0; c < 3; ++c) sum += std::abs(a.at(y, x, c) - b.at(y, x, c));
      n += 3;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

namespace {

FilterParams draw_filter_params(Rng& rng, const HarmonizeConfig& c) {
  FilterParams p;
  p.brightness = rng.uniform(c.brightness_min, c.brightness_max);
  p.contrast = rng.uniform(c.contrast_min, c.contrast_max);
  p.saturation = rng.uniform(c.saturation_min, c.saturation_max);
  for (double& g : p.gains) g = rng.uniform(c.gain_min, c.gain_max);
  return p;
}

const RecipePreset& best_fitting_preset(const ImageRGB& img, const SoftMask& mask, int ring_width) {
  const RegionStats ring = region_stats(img, ring_mask(mask, ring_width));
  const BinaryMask fg = binarize(mask);
  const RecipePreset* best = &recipe_registry().front();
  double best_err = std::numeric_limits<double>::infinity();
  for (const auto& preset : recipe_registry()) {
    const RegionStats s = region_stats(apply_recipe(img, mask, preset), fg);
    double err = 0.0;
    for (int c = 0; c < 3; ++c) err += (s.mean[c] - ring.mean[c]) * (s.mean[c] - ring.mean[c]);
    err += (s.luma_std - ring.luma_std) * (s.luma_std - ring.luma_std);
    if (err < best_err) {
      best_err = err;
      best = &preset;
    }
  }
  return *best;
}

}  // namespace

std::pair<ImageRGB, nlohmann::json> harmonize_image(const ImageRGB& composite, const SoftMask& mask,
                                                    Method method, Mode mode, Rng& rng,
                                                    const HarmonizeConfig& config) {
  check_shapes(composite, mask, "harmonize");
  config.validate();
  nlohmann::json record = {{"method", to_string(method)}, {"mode", to_string(mode)}};
  if (method == Method::kNone) return {composite, record};

  if (mode == Mode::kFit) {
    switch (method) {
      case Method::kFilterChain: {
        const FilterFit fit = fit_filter_params(composite, mask, config.ring_width);
        record["params"] = fit.params.to_json();
        record["contrast_fallback"] = fit.contrast_fallback;
        return {apply_filter_chain(composite, mask, fit.params), record};
      }
      case Method::kRecipe: {
        const RecipePreset& preset = best_fitting_preset(composite, mask, config.ring_width);
        record["preset"] = preset.name;
        return {apply_recipe(composite, mask, preset), record};
      }
      default:
        record["sigma"] = config.fit_sigma;
        record["strength"] = 1.0;
        return {reshade(composite, mask, config.fit_sigma, 1.0, config.ring_width), record};
    }
  }

  // Random mode: redraw until the edit is visible inside the mask.
  ImageRGB out;
  int draws = 0;
  for (;; ++draws) {
    switch (method) {
      case Method::kFilterChain: {
        const FilterParams p = draw_filter_params(rng, config);
        record["params"] = p.to_json();
        out = apply_filter_chain(composite, mask, p);
        break;
      }
      case Method::kRecipe: {
        const auto& reg = recipe_registry();
        const RecipePreset& preset = reg[rng.below(reg.size())];
        record["preset"] = preset.name;
        out = apply_recipe(composite, mask, preset);
        break;
      }
      default: {
        const double sigma = rng.uniform(config.physics_sigma_min, config.physics_sigma_max);
        const double strength = rng.uniform(config.physics_strength_min, config.physics_strength_max);
        record["sigma"] = sigma;
        record["strength"] = strength;
        out = reshade(composite, mask, sigma, strength, config.ring_width);
        break;
      }
    }
    const double effect = masked_mean_abs_diff(out, composite, mask);
    if (effect > config.min_effect || draws >= config.max_redraws) {
      record["effect"] = effect;
      record["below_min_effect"] = effect <= config.min_effect;
      break;
    }
  }
  record["redraws"] = draws;
  return {std::move(out), record};
}

HarmonizedSample harmonize(const corpus::CompositeSample& sample, Method method, Mode mode, Rng& rng,
                           const HarmonizeConfig& config) {
  HarmonizedSample h;
  auto [img, record] = harmonize_image(sample.composite, sample.mask, method, mode, rng, config);
  h.base = sample;
  h.harmonized = std::move(img);
  h.method = method;
  h.params_record = std::move(record);
  return h;
}

}  // namespace lightsplice::harmonize
