#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "lightsplice/corpus.hpp"
#include "lightsplice/error.hpp"
#include "lightsplice/filters.hpp"
#include "lightsplice/harmonize.hpp"
#include "lightsplice/image_io.hpp"
#include "oracles.hpp"

using namespace lightsplice;
using namespace lightsplice::harmonize;

namespace {

ImageRGB noise_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  ImageRGB im(h, w);
  for (double& v : im.values()) v = rng.uniform();
  return im;
}

SoftMask square_mask(int side, int lo, int hi) {
  SoftMask m(side, side, 0.0);
  for (int y = lo; y < hi; ++y)
    for (int x = lo; x < hi; ++x) m.at(y, x) = 1.0;
  return m;
}

FilterParams random_params(Rng& rng) {
  FilterParams p;
  p.brightness = rng.uniform(-0.3, 0.3);
  p.contrast = rng.uniform(0.7, 1.3);
  p.saturation = rng.uniform(0.0, 1.5);
  for (double& g : p.gains) g = rng.uniform(0.8, 1.2);
  return p;
}

}  // namespace

TEST(FilterChain, IdentityIsExact) {
  const auto im = noise_image(16, 16, 1);
  EXPECT_EQ(apply_filter_chain(im, square_mask(16, 2, 12), FilterParams{}), im);
  EXPECT_TRUE(FilterParams{}.is_identity());
}

TEST(FilterChain, ZeroSaturationOnRedGivesLuma) {
  ImageRGB im(8, 8, 0.0);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) im.at(y, x, 0) = 1.0;
  FilterParams p;
  p.saturation = 0.0;
  const auto out = apply_filter_chain(im, SoftMask(8, 8, 1.0), p);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.at(4, 4, c), 0.299, 1e-15);
}

TEST(FilterChain, EmptyMaskIsIdentity) {
  Rng rng(2);
  const auto im = noise_image(16, 16, 3);
  EXPECT_EQ(apply_filter_chain(im, SoftMask(16, 16, 0.0), random_params(rng)), im);
}

TEST(FilterChain, OutOfRangeParamsThrow) {
  const auto im = noise_image(8, 8, 4);
  FilterParams p;
  p.contrast = 1.4;
  EXPECT_THROW(apply_filter_chain(im, SoftMask(8, 8, 1.0), p), ArgumentError);
  p = {};
  p.gains[1] = 0.7;
  EXPECT_THROW(apply_filter_chain(im, SoftMask(8, 8, 1.0), p), ArgumentError);
}

TEST(FilterChain, FixedOrderMakesRepeatDiffer) {
  const auto im = noise_image(16, 16, 5);
  const SoftMask m(16, 16, 1.0);
  FilterParams p;
  p.contrast = 1.2;
  p.brightness = 0.05;
  p.gains = {1.1, 0.9, 1.0};
  EXPECT_NE(apply_filter_chain(apply_filter_chain(im, m, p), m, p), apply_filter_chain(im, m, p));
}

TEST(FilterChain, ParamsJsonRoundTrip) {
  Rng rng(6);
  const auto p = random_params(rng);
  EXPECT_EQ(FilterParams::from_json(p.to_json()), p);
}

namespace {

// Foreground and ring with controlled luma statistics: a gray square inside
// a gray surround, both with the same small checker texture.
ImageRGB two_region(double fg_mean, double bg_mean, double amp) {
  ImageRGB im(48, 48);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 48; ++x) {
      const bool in = y >= 16 && y < 32 && x >= 16 && x < 32;
      const double v = (in ? fg_mean : bg_mean) + ((x + y) % 2 ? amp : -amp);
      for (int c = 0; c < 3; ++c) im.at(y, x, c) = v;
    }
  }
  return im;
}

}  // namespace

TEST(FitFilter, MatchedStatisticsGiveIdentity) {
  const auto fit = fit_filter_params(two_region(0.5, 0.5, 0.1), square_mask(48, 16, 32));
  EXPECT_NEAR(fit.params.contrast, 1.0, 1e-12);
  EXPECT_NEAR(fit.params.brightness, 0.0, 1e-12);
  for (double g : fit.params.gains) EXPECT_NEAR(g, 1.0, 1e-12);
  EXPECT_FALSE(fit.contrast_fallback);
}

TEST(FitFilter, DarkForegroundBrightRingClampsBrightness) {
  const auto fit = fit_filter_params(two_region(0.3, 0.6, 0.05), square_mask(48, 16, 32));
  EXPECT_NEAR(fit.params.contrast, 1.0, 1e-9);
  EXPECT_EQ(fit.params.brightness, FilterParams::kBrightnessMax);
}

TEST(FitFilter, FlatForegroundFallsBack) {
  ImageRGB im = two_region(0.4, 0.6, 0.05);
  for (int y = 16; y < 32; ++y)
    for (int x = 16; x < 32; ++x)
      for (int c = 0; c < 3; ++c) im.at(y, x, c) = 0.4;
  const auto fit = fit_filter_params(im, square_mask(48, 16, 32));
  EXPECT_TRUE(fit.contrast_fallback);
  EXPECT_EQ(fit.params.contrast, 1.0);
}

TEST(FitFilter, TinyMaskOrRingRejected) {
  const auto im = noise_image(48, 48, 7);
  EXPECT_THROW(fit_filter_params(im, square_mask(48, 20, 23)), ArgumentError);
  EXPECT_THROW(fit_filter_params(im, SoftMask(48, 48, 1.0)), ArgumentError);
}

TEST(FitFilter, RefittingContracts) {
  int closer = 0, total = 0;
  for (int i = 0; i < 40; ++i) {
    const auto s = corpus::generate_synthetic_sample(21, i, corpus::GenConfig{});
    FilterFit first;
    try {
      first = fit_filter_params(s.composite, s.mask);
    } catch (const ArgumentError&) {
      continue;
    }
    const auto once = apply_filter_chain(s.composite, s.mask, first.params);
    const auto second = fit_filter_params(once, s.mask);
    auto dist = [](const FilterParams& p) {
      return std::abs(p.brightness) + std::abs(p.contrast - 1.0) + std::abs(p.gains[0] - 1.0) +
             std::abs(p.gains[1] - 1.0) + std::abs(p.gains[2] - 1.0);
    };
    ++total;
    closer += dist(second.params) < dist(first.params) || dist(first.params) == 0.0;
  }
  ASSERT_GT(total, 20);
  EXPECT_GE(static_cast<double>(closer) / total, 0.9);
}

TEST(Recipe, RegistryIsUniqueAndInRange) {
  std::set<std::string> names;
  for (const auto& p : recipe_registry()) {
    EXPECT_TRUE(names.insert(p.name).second);
    EXPECT_TRUE(p.params.in_range()) << p.name;
    for (double o : p.offsets) {
      EXPECT_GE(o, -0.1);
      EXPECT_LE(o, 0.1);
    }
  }
  for (const char* n : {"warmer", "cooler", "brighter", "darker", "matte", "vivid"}) EXPECT_TRUE(names.count(n));
  EXPECT_THROW(find_preset("sepia"), LookupError);
}

TEST(Recipe, WarmerOnMidGray) {
  const auto out = apply_recipe(ImageRGB(8, 8, 0.5), SoftMask(8, 8, 1.0), "warmer");
  EXPECT_NEAR(out.at(3, 3, 0), 0.55, 1e-15);
  EXPECT_NEAR(out.at(3, 3, 1), 0.50, 1e-15);
  EXPECT_NEAR(out.at(3, 3, 2), 0.45, 1e-15);
}

TEST(Recipe, IdentityPresetAndEmptyMask) {
  const auto im = noise_image(16, 16, 8);
  EXPECT_EQ(apply_recipe(im, SoftMask(16, 16, 1.0), RecipePreset{"plain", {}, {0, 0, 0}}), im);
  for (const auto& p : recipe_registry()) EXPECT_EQ(apply_recipe(im, SoftMask(16, 16, 0.0), p), im);
}

TEST(Shading, ConstantBlackAndGradient) {
  for (const auto r = estimate_shading(ImageRGB(16, 16, 0.4), 3.0); double v : r.values()) EXPECT_NEAR(v, 0.4, 1e-12);
  for (const auto r = estimate_shading(ImageRGB(16, 16, 0.0), 3.0); double v : r.values()) EXPECT_EQ(v, kShadingFloor);
  ImageRGB g(16, 32);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) g.at(y, x, c) = x / 31.0;
  const auto s = estimate_shading(g, 2.0);
  const auto ref = oracle::blur_2d(luma_plane<ShadingTag>(g), 2.0);
  for (int y = 0; y < 16; ++y) {
    for (int x = 1; x < 32; ++x) EXPECT_GE(s.at(y, x), s.at(y, x - 1) - 1e-15);
    for (int x = 0; x < 32; ++x) EXPECT_NEAR(s.at(y, x), std::max(ref.at(y, x), kShadingFloor), 1e-12);
  }
  EXPECT_THROW(estimate_shading(g, 0.0), ArgumentError);
}

TEST(Reshade, FixedPointAndDirection) {
  const auto flat = ImageRGB(32, 32, 0.5);
  const auto m = square_mask(32, 10, 22);
  const auto same = reshade(flat, m, 4.0);
  for (std::size_t i = 0; i < flat.size(); ++i) EXPECT_NEAR(same.values()[i], 0.5, 1.0 / 255);

  ImageRGB scene(48, 48, 0.2);
  for (int y = 16; y < 32; ++y)
    for (int x = 16; x < 32; ++x)
      for (int c = 0; c < 3; ++c) scene.at(y, x, c) = 0.8;
  const auto mask = square_mask(48, 16, 32);
  const auto out = reshade(scene, mask, 4.0);
  auto masked_luma = [&](const ImageRGB& im) {
    double s = 0.0;
    int n = 0;
    for (int y = 16; y < 32; ++y)
      for (int x = 16; x < 32; ++x, ++n) s += luma(im.at(y, x, 0), im.at(y, x, 1), im.at(y, x, 2));
    return s / n;
  };
  EXPECT_LT(masked_luma(out), masked_luma(scene));
  EXPECT_THROW(reshade(scene, SoftMask(48, 48, 0.0), 4.0), ArgumentError);
}

TEST(Harmonize, NoneIsByteExactAndMethodsParse) {
  const auto s = corpus::generate_synthetic_sample(3, 1, corpus::GenConfig{});
  Rng rng(1);
  EXPECT_EQ(harmonize::harmonize(s, Method::kNone, Mode::kRandom, rng).harmonized, s.composite);
  for (auto m : kFamilies) EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_THROW(parse_method("dovenet"), ArgumentError);
  EXPECT_THROW(parse_mode("guess"), ArgumentError);
}

TEST(Harmonize, DeterministicAndVisible) {
  const auto s = corpus::generate_synthetic_sample(3, 2, corpus::GenConfig{});
  for (auto mode : {Mode::kRandom, Mode::kFit}) {
    for (auto m : kFamilies) {
      Rng a(77), b(77);
      const auto x = harmonize::harmonize(s, m, mode, a);
      const auto y = harmonize::harmonize(s, m, mode, b);
      EXPECT_EQ(x.harmonized, y.harmonized);
      EXPECT_EQ(x.params_record, y.params_record);
      EXPECT_FALSE(x.params_record.empty());
      if (mode == Mode::kRandom) {
        EXPECT_GT(masked_mean_abs_diff(x.harmonized, s.composite, s.mask), 1.0 / 255) << to_string(m);
      }
    }
  }
}

TEST(Harmonize, LocalityAndRangeOverManyDraws) {
  // Outside the feathered support the image is untouched; inside, values
  // stay finite and within [0,1].
  int applications = 0;
  for (int i = 0; i < 120; ++i) {
    corpus::GenConfig cfg;
    cfg.height = cfg.width = 32;
    const auto s = corpus::generate_synthetic_sample(500, i, cfg);
    Rng rng(derive_seed(9, i));
    for (auto m : kFamilies) {
      const auto mode = i % 2 ? Mode::kRandom : Mode::kFit;
      const auto out = harmonize_image(s.composite, s.mask, m, mode, rng).first;
      ++applications;
      for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
          for (int c = 0; c < 3; ++c) {
            const double v = out.at(y, x, c);
            ASSERT_TRUE(std::isfinite(v));
            ASSERT_GE(v, 0.0);
            ASSERT_LE(v, 1.0);
            if (s.mask.at(y, x) == 0.0) ASSERT_LE(std::abs(v - s.composite.at(y, x, c)), 1.0 / 255);
          }
        }
      }
    }
  }
  EXPECT_EQ(applications, 360);
}

TEST(HarmonizeConfigJson, RoundTripAndValidation) {
  HarmonizeConfig cfg;
  cfg.brightness_max = 0.2;
  EXPECT_EQ(HarmonizeConfig::from_json(cfg.to_json()).to_json(), cfg.to_json());
  cfg.contrast_max = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
}
