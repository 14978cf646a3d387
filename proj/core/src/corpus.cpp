#include "lightsplice/corpus.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "lightsplice/error.hpp"
#include "lightsplice/filters.hpp"

namespace lightsplice::corpus {

using Rgb = std::array<double, 3>;
using Plane = Raster<1, MaskTag>;

ImageRGB composite(const ImageRGB& bg, const ImageRGB& fg, const SoftMask& mask) {
  if (!bg.same_shape(fg) || !bg.same_shape(mask)) {
    throw DimensionError("composite: background, foreground and mask shapes differ");
  }
  ImageRGB out(bg.height(), bg.width());
  for (int y = 0; y < bg.height(); ++y) {
    for (int x = 0; x < bg.width(); ++x) {
      const double m = mask.at(y, x);
      for (int c = 0; c < 3; ++c) {
        out.at(y, x, c) = std::clamp(blend_value(bg.at(y, x, c), fg.at(y, x, c), m), 0.0, 1.0);
      }
    }
  }
  return out;
}

SoftMask feather_mask(const BinaryMask& mask, double radius) {
  if (radius < 0.0 || !std::isfinite(radius)) {
    throw ArgumentError("feather_mask: radius must be >= 0, got " + std::to_string(radius));
  }
  if (radius == 0.0) return mask;
  SoftMask out = gaussian_blur(mask, radius / 2.0);
  out.clamp01();
  return out;
}

ImageRGB resize(const ImageRGB& image, int side) {
  if (side < 8) throw ArgumentError("resize: side must be >= 8, got " + std::to_string(side));
  if (image.same_shape(side, side)) return image;
  return resize_bilinear(image, side, side);
}

SoftMask resize(const SoftMask& mask, int side) {
  if (side < 1) throw ArgumentError("resize: side must be >= 1, got " + std::to_string(side));
  if (mask.same_shape(side, side)) return mask;
  return resize_bilinear(mask, side, side);
}

std::string to_string(ShapeFamily f) {
  switch (f) {
    case ShapeFamily::kRandom: return "random";
    case ShapeFamily::kEllipse: return "ellipse";
    case ShapeFamily::kPolygon: return "polygon";
    case ShapeFamily::kTexturedPatch: return "textured_patch";
  }
  return "random";
}

std::string to_string(TextureFamily f) {
  switch (f) {
    case TextureFamily::kRandom: return "random";
    case TextureFamily::kLinearGradient: return "linear_gradient";
    case TextureFamily::kPerlinNoise: return "perlin_noise";
    case TextureFamily::kFlatVignette: return "flat_vignette";
  }
  return "random";
}

ShapeFamily parse_shape_family(const std::string& s) {
  for (auto f : {ShapeFamily::kRandom, ShapeFamily::kEllipse, ShapeFamily::kPolygon,
                 ShapeFamily::kTexturedPatch}) {
    if (to_string(f) == s) return f;
  }
  throw ArgumentError("unknown shape family '" + s + "'");
}

TextureFamily parse_texture_family(const std::string& s) {
  for (auto f : {TextureFamily::kRandom, TextureFamily::kLinearGradient,
                 TextureFamily::kPerlinNoise, TextureFamily::kFlatVignette}) {
    if (to_string(f) == s) return f;
  }
  throw ArgumentError("unknown texture family '" + s + "'");
}

nlohmann::json GenConfig::to_json() const {
  return {{"height", height},
          {"width", width},
          {"shape", to_string(shape)},
          {"texture", to_string(texture)},
          {"min_area", min_area},
          {"max_area", max_area},
          {"feather_radius", feather_radius},
          {"max_distractors", max_distractors},
          {"min_ambient_ratio", min_ambient_ratio},
          {"max_ambient_ratio", max_ambient_ratio},
          {"low_noise", low_noise},
          {"high_noise", high_noise}};
}

GenConfig GenConfig::from_json(const nlohmann::json& j) {
  GenConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "height") c.height = value.get<int>();
    else if (key == "width") c.width = value.get<int>();
    else if (key == "shape") c.shape = parse_shape_family(value.get<std::string>());
    else if (key == "texture") c.texture = parse_texture_family(value.get<std::string>());
    else if (key == "min_area") c.min_area = value.get<double>();
    else if (key == "max_area") c.max_area = value.get<double>();
    else if (key == "feather_radius") c.feather_radius = value.get<double>();
    else if (key == "max_distractors") c.max_distractors = value.get<int>();
    else if (key == "min_ambient_ratio") c.min_ambient_ratio = value.get<double>();
    else if (key == "max_ambient_ratio") c.max_ambient_ratio = value.get<double>();
    else if (key == "low_noise") c.low_noise = value.get<double>();
    else if (key == "high_noise") c.high_noise = value.get<double>();
    else throw ConfigError("unknown generator config key '" + key + "'");
  }
  return c;
}

double mask_area_fraction(const SoftMask& mask) {
  std::size_t n = 0;
  for (double v : mask.values()) n += v >= 0.5 ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(mask.pixels());
}

namespace {

Rgb random_color(Rng& rng, double lo = 0.15, double hi = 0.9) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

// Smoothly interpolated lattice noise, a few octaves, normalized to [0,1].
Plane value_noise(Rng& rng, int h, int w, int base_cells, int octaves) {
  Plane out(h, w);
  double amp = 1.0;
  double total = 0.0;
  int cells = base_cells;
  for (int o = 0; o < octaves; ++o) {
    std::vector<double> lattice(static_cast<std::size_t>(cells + 1) * (cells + 1));
    for (double& v : lattice) v = rng.uniform();
    auto fade = [](double t) { return t * t * (3.0 - 2.0 * t); };
    for (int y = 0; y < h; ++y) {
      const double gy = static_cast<double>(y) / h * cells;
      const int iy = std::min(static_cast<int>(gy), cells - 1);
      const double ty = fade(gy - iy);
      for (int x = 0; x < w; ++x) {
        const double gx = static_cast<double>(x) / w * cells;
        const int ix = std::min(static_cast<int>(gx), cells - 1);
        const double tx = fade(gx - ix);
        auto L = [&](int a, int b) { return lattice[static_cast<std::size_t>(a) * (cells + 1) + b]; };
        const double top = L(iy, ix) + tx * (L(iy, ix + 1) - L(iy, ix));
        const double bot = L(iy + 1, ix) + tx * (L(iy + 1, ix + 1) - L(iy + 1, ix));
        out.at(y, x) += amp * (top + ty * (bot - top));
      }
    }
    total += amp;
    amp *= 0.5;
    cells *= 2;
  }
  for (double& v : out.values()) v /= total;
  return out;
}

ImageRGB background_albedo(Rng& rng, TextureFamily family, int h, int w) {
  if (family == TextureFamily::kRandom) {
    family = static_cast<TextureFamily>(1 + rng.below(3));
  }
  ImageRGB out(h, w);
  const Rgb c0 = random_color(rng);
  const Rgb c1 = random_color(rng);
  switch (family) {
    case TextureFamily::kLinearGradient: {
      const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double ct = std::cos(theta), st = std::sin(theta);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double p = ((x + 0.5) / w - 0.5) * ct + ((y + 0.5) / h - 0.5) * st;
          const double t = std::clamp(p / std::numbers::sqrt2 + 0.5, 0.0, 1.0);
          for (int c = 0; c < 3; ++c) out.at(y, x, c) = c0[c] + t * (c1[c] - c0[c]);
        }
      }
      break;
    }
    case TextureFamily::kPerlinNoise: {
      const Plane n = value_noise(rng, h, w, rng.uniform_int(2, 4), 3);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double t = n.at(y, x);
          for (int c = 0; c < 3; ++c) out.at(y, x, c) = c0[c] + t * (c1[c] - c0[c]);
        }
      }
      break;
    }
    default: {
      const double k = rng.uniform(0.2, 0.5);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double dx = (x + 0.5) / w - 0.5, dy = (y + 0.5) / h - 0.5;
          const double v = 1.0 - k * 2.0 * (dx * dx + dy * dy);
          for (int c = 0; c < 3; ++c) out.at(y, x, c) = c0[c] * v;
        }
      }
      break;
    }
  }
  return out;
}

// Object reflectance covering the whole canvas; the shape mask cuts it out.
ImageRGB object_albedo(Rng& rng, ShapeFamily shape, int h, int w) {
  ImageRGB out(h, w);
  const Rgb base = random_color(rng, 0.2, 0.85);
  if (shape == ShapeFamily::kTexturedPatch) {
    const Rgb alt = random_color(rng, 0.2, 0.85);
    const double period = rng.uniform(4.0, 10.0);
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double ct = std::cos(theta), st = std::sin(theta);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double p = (x * ct + y * st) / period;
        const double t = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * p);
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = base[c] + t * (alt[c] - base[c]);
      }
    }
    return out;
  }
  const Plane n = value_noise(rng, h, w, rng.uniform_int(3, 6), 2);
  const double depth = rng.uniform(0.2, 0.5);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = 1.0 - depth + 2.0 * depth * n.at(y, x);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = std::clamp(base[c] * v, 0.0, 1.0);
    }
  }
  return out;
}

struct Lighting {
  double ambient;
  double strength;
  double angle;
  Rgb tint;
  double noise_sigma;
};

Lighting random_lighting(Rng& rng) {
  Lighting l;
  l.ambient = rng.uniform(0.6, 0.85);
  l.strength = rng.uniform(0.15, 0.45);
  l.angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  l.tint = {1.0 + rng.uniform(-0.08, 0.08), 1.0, 1.0 + rng.uniform(-0.08, 0.08)};
  l.noise_sigma = 0.0;
  return l;
}

ImageRGB render(const ImageRGB& albedo, const Lighting& light, Rng& rng) {
  const int h = albedo.height(), w = albedo.width();
  ImageRGB out(h, w);
  const double ct = std::cos(light.angle), st = std::sin(light.angle);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double p = ((x + 0.5) / w - 0.5) * ct + ((y + 0.5) / h - 0.5) * st;
      const double shade = light.ambient + light.strength * p * std::numbers::sqrt2;
      for (int c = 0; c < 3; ++c) {
        const double v = albedo.at(y, x, c) * shade * light.tint[c] + light.noise_sigma * rng.normal();
        out.at(y, x, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return out;
}

// Rasterize one object of the given family with roughly `area` pixels.
BinaryMask draw_shape(Rng& rng, ShapeFamily family, int h, int w, double area) {
  BinaryMask m(h, w);
  const double cx = rng.uniform(0.2, 0.8) * w;
  const double cy = rng.uniform(0.2, 0.8) * h;
  const double phi = rng.uniform(0.0, std::numbers::pi);
  const double cp = std::cos(phi), sp = std::sin(phi);
  switch (family) {
    case ShapeFamily::kEllipse: {
      const double aspect = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
      const double a = std::sqrt(area * aspect / std::numbers::pi);
      const double b = a / aspect;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
          const double u = (dx * cp + dy * sp) / a, v = (-dx * sp + dy * cp) / b;
          m.at(y, x) = u * u + v * v <= 1.0 ? 1.0 : 0.0;
        }
      }
      break;
    }
    case ShapeFamily::kPolygon: {
      const int n = rng.uniform_int(5, 9);
      std::vector<double> px(n), py(n);
      double unit_area = 0.0;
      std::vector<double> ang(n), rad(n);
      for (int k = 0; k < n; ++k) {
        ang[k] = 2.0 * std::numbers::pi * (k + rng.uniform(-0.3, 0.3)) / n;
        rad[k] = rng.uniform(0.6, 1.0);
      }
      for (int k = 0; k < n; ++k) {
        const int j = (k + 1) % n;
        double d = ang[j] - ang[k];
        if (j == 0) d += 2.0 * std::numbers::pi;
        unit_area += 0.5 * rad[k] * rad[j] * std::sin(d);
      }
      const double scale = std::sqrt(area / unit_area);
      for (int k = 0; k < n; ++k) {
        px[k] = cx + scale * rad[k] * std::cos(ang[k] + phi);
        py[k] = cy + scale * rad[k] * std::sin(ang[k] + phi);
      }
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double qx = x + 0.5, qy = y + 0.5;
          bool inside = false;
          for (int i = 0, j = n - 1; i < n; j = i++) {
            if ((py[i] > qy) != (py[j] > qy) &&
                qx < (px[j] - px[i]) * (qy - py[i]) / (py[j] - py[i]) + px[i]) {
              inside = !inside;
            }
          }
          m.at(y, x) = inside ? 1.0 : 0.0;
        }
      }
      break;
    }
    default: {
      const double aspect = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
      const double half_w = 0.5 * std::sqrt(area * aspect);
      const double half_h = 0.5 * std::sqrt(area / aspect);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
          const double u = dx * cp + dy * sp, v = -dx * sp + dy * cp;
          m.at(y, x) = std::abs(u) <= half_w && std::abs(v) <= half_h ? 1.0 : 0.0;
        }
      }
      break;
    }
  }
  return m;
}

ShapeFamily pick_shape(Rng& rng, ShapeFamily requested) {
  if (requested != ShapeFamily::kRandom) return requested;
  return static_cast<ShapeFamily>(1 + rng.below(3));
}

void paint(ImageRGB& dst, const ImageRGB& src, const SoftMask& mask) {
  for (int y = 0; y < dst.height(); ++y) {
    for (int x = 0; x < dst.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        dst.at(y, x, c) = blend_value(dst.at(y, x, c), src.at(y, x, c), mask.at(y, x));
      }
    }
  }
}

}  // namespace

CompositeSample generate_synthetic_sample(Rng& rng, const GenConfig& config) {
  const int h = config.height, w = config.width;
  if (h < 16 || w < 16) {
    throw ArgumentError("generate_synthetic_sample: canvas must be at least 16x16, got " +
                        std::to_string(h) + "x" + std::to_string(w));
  }
  if (!(config.min_area >= 0.0 && config.min_area < config.max_area && config.max_area <= 1.0)) {
    throw ArgumentError("generate_synthetic_sample: invalid area bounds");
  }
  const double canvas = static_cast<double>(h) * w;

  // Scene reflectance, with optional consistently lit distractor objects.
  ImageRGB scene_albedo = background_albedo(rng, config.texture, h, w);
  const int distractors = config.max_distractors > 0 ? rng.uniform_int(0, config.max_distractors) : 0;
  for (int i = 0; i < distractors; ++i) {
    const ShapeFamily fam = pick_shape(rng, ShapeFamily::kRandom);
    const BinaryMask shape = draw_shape(rng, fam, h, w, rng.uniform(0.02, 0.12) * canvas);
    paint(scene_albedo, object_albedo(rng, fam, h, w), feather_mask(shape, config.feather_radius));
  }

  // The edited object: sample a target area, reject shapes whose clipped
  // area falls outside the configured bounds.
  const ShapeFamily fam = pick_shape(rng, config.shape);
  const double lo = std::max(config.min_area, 0.03);
  const double hi = std::min(config.max_area, 0.30);
  BinaryMask shape;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 200) {
      throw ArgumentError("generate_synthetic_sample: cannot satisfy area bounds");
    }
    const double target = rng.uniform(std::min(lo, hi), std::max(lo, hi));
    shape = draw_shape(rng, fam, h, w, target * canvas);
    const double frac = mask_area_fraction(shape);
    if (frac >= config.min_area && frac <= config.max_area) break;
  }
  const SoftMask soft = feather_mask(shape, config.feather_radius);
  const ImageRGB obj = object_albedo(rng, fam, h, w);
  paint(scene_albedo, obj, soft);

  Lighting scene_light = random_lighting(rng);
  Lighting donor_light = random_lighting(rng);
  const double ratio = rng.uniform(config.min_ambient_ratio, config.max_ambient_ratio);
  donor_light.ambient = rng.coin() ? scene_light.ambient * ratio : scene_light.ambient / ratio;
  const bool noisy_scene = rng.coin();
  auto noise = [&](bool high) {
    return high ? rng.uniform(0.75, 1.25) * config.high_noise : rng.uniform(0.5, 1.0) * config.low_noise;
  };
  scene_light.noise_sigma = noise(noisy_scene);
  donor_light.noise_sigma = noise(!noisy_scene);

  CompositeSample s;
  s.background = render(scene_albedo, scene_light, rng);
  s.foreground = render(obj, donor_light, rng);
  s.mask = soft;
  s.composite = composite(s.background, s.foreground, s.mask);
  return s;
}

CompositeSample generate_synthetic_sample(std::uint64_t seed, std::uint64_t index,
                                          const GenConfig& config) {
  Rng rng(derive_seed(seed, index));
  CompositeSample s = generate_synthetic_sample(rng, config);
  char id[32];
  std::snprintf(id, sizeof id, "s%06llu", static_cast<unsigned long long>(index));
  s.sample_id = id;
  return s;
}

}  // namespace lightsplice::corpus
