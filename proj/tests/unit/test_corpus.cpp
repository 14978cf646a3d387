#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "lightsplice/corpus.hpp"
#include "lightsplice/error.hpp"
#include "lightsplice/filters.hpp"
#include "lightsplice/image_io.hpp"
#include "lightsplice/manifest.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace lightsplice;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lightsplice_corpus_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ImageRGB constant_image(int h, int w, double v) { return ImageRGB(h, w, v); }

ImageRGB noise_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  ImageRGB im(h, w);
  for (double& v : im.values()) v = rng.uniform();
  return im;
}

}  // namespace

TEST(Raster, RejectsImagesBelowEightPixels) {
  EXPECT_THROW(ImageRGB(7, 8), DimensionError);
  EXPECT_THROW(ImageRGB(8, 0), DimensionError);
  EXPECT_NO_THROW(ImageRGB(8, 8));
  EXPECT_NO_THROW(SoftMask(2, 2));
}

TEST(ImageIo, DecodeMapsEightBitValues) {
  const fs::path dir = scratch("io");
  save_png(dir / "black.png", constant_image(8, 8, 0.0));
  save_png(dir / "white.png", constant_image(8, 8, 1.0));
  save_png(dir / "mid.png", constant_image(8, 8, 128.0 / 255.0));
  for (const auto r = load_image(dir / "black.png"); double v : r.values()) EXPECT_EQ(v, 0.0);
  for (const auto r = load_image(dir / "white.png"); double v : r.values()) EXPECT_EQ(v, 1.0);
  for (const auto r = load_image(dir / "mid.png"); double v : r.values()) EXPECT_DOUBLE_EQ(v, 128.0 / 255.0);
}

TEST(ImageIo, GrayscaleIsReplicated) {
  const fs::path dir = scratch("gray");
  SoftMask m(8, 8, 0.0);
  m.at(3, 4) = 1.0;
  save_png(dir / "g.png", m);
  const auto im = load_image(dir / "g.png");
  EXPECT_EQ(im.at(3, 4, 0), 1.0);
  EXPECT_EQ(im.at(3, 4, 2), 1.0);
  EXPECT_EQ(im.at(0, 0, 1), 0.0);
}

TEST(ImageIo, CorruptFileNamesThePath) {
  const fs::path dir = scratch("corrupt");
  std::ofstream(dir / "bad.png") << "not a png";
  try {
    load_image(dir / "bad.png");
    FAIL() << "expected DecodeError";
  } catch (const DecodeError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.png"), std::string::npos);
  }
  EXPECT_THROW(load_image(dir / "missing.png"), DecodeError);
}

TEST(Composite, MaskExtremesSelectInputs) {
  const auto bg = noise_image(16, 16, 1);
  const auto fg = noise_image(16, 16, 2);
  EXPECT_EQ(corpus::composite(bg, fg, SoftMask(16, 16, 0.0)), bg);
  EXPECT_EQ(corpus::composite(bg, fg, SoftMask(16, 16, 1.0)), fg);
}

TEST(Composite, HalfMaskAverages) {
  const auto out = corpus::composite(constant_image(8, 8, 0.2), constant_image(8, 8, 0.8), SoftMask(8, 8, 0.5));
  for (double v : out.values()) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(Composite, ShapeMismatchThrows) {
  EXPECT_THROW(corpus::composite(ImageRGB(8, 8), ImageRGB(8, 9), SoftMask(8, 8)), DimensionError);
  EXPECT_THROW(corpus::composite(ImageRGB(8, 8), ImageRGB(8, 8), SoftMask(9, 8)), DimensionError);
}

TEST(Composite, BlendSymmetry) {
  const auto a = noise_image(16, 16, 3);
  const auto b = noise_image(16, 16, 4);
  Rng rng(5);
  SoftMask m(16, 16);
  for (double& v : m.values()) v = rng.uniform();
  SoftMask inv(16, 16);
  for (std::size_t i = 0; i < m.size(); ++i) inv.values()[i] = 1.0 - m.values()[i];
  const auto x = corpus::composite(a, b, m);
  const auto y = corpus::composite(b, a, inv);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x.values()[i], y.values()[i], 1e-15);
}

TEST(Feather, ZeroRadiusIsIdentity) {
  BinaryMask m(32, 32, 0.0);
  for (int y = 10; y < 20; ++y)
    for (int x = 8; x < 24; ++x) m.at(y, x) = 1.0;
  EXPECT_EQ(corpus::feather_mask(m, 0.0), m);
}

TEST(Feather, ConstantFieldInvariant) {
  for (double r : {0.5, 1.0, 3.0, 7.0}) {
    for (const auto f = corpus::feather_mask(BinaryMask(20, 20, 1.0), r); double v : f.values()) EXPECT_NEAR(v, 1.0, 1e-12);
  }
}

TEST(Feather, NegativeRadiusThrows) { EXPECT_THROW(corpus::feather_mask(BinaryMask(8, 8), -1.0), ArgumentError); }

TEST(Feather, CenteredSquareMatchesTwoDimensionalBlur) {
  BinaryMask m(32, 32, 0.0);
  for (int y = 8; y < 24; ++y)
    for (int x = 8; x < 24; ++x) m.at(y, x) = 1.0;
  const auto f = corpus::feather_mask(m, 2.0);
  const auto ref = oracle::blur_2d(m, 1.0);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(f.values()[i], ref.values()[i], 1e-12);
  EXPECT_NEAR(f.at(16, 16), 1.0, 1e-12);
  EXPECT_GT(f.at(8, 16), 0.0);
  EXPECT_LT(f.at(8, 16), 1.0);
  EXPECT_GT(f.at(7, 16), 0.0);
  EXPECT_LT(f.at(7, 16), 1.0);
}

TEST(Feather, InteriorAndMassPreserved) {
  BinaryMask m(48, 48, 0.0);
  for (int y = 12; y < 36; ++y)
    for (int x = 12; x < 36; ++x) m.at(y, x) = 1.0;
  for (double r : {1.0, 2.0, 3.0}) {
    const auto f = corpus::feather_mask(m, r);
    const int in = static_cast<int>(std::ceil(3 * r)) + 1;
    for (int y = 12 + in; y < 36 - in; ++y)
      for (int x = 12 + in; x < 36 - in; ++x) EXPECT_GE(f.at(y, x), 0.999);
    EXPECT_NEAR(mean_value(f.values()) / mean_value(m.values()), 1.0, 0.10);
    for (double v : f.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Resize, SameSideIsIdentity) {
  const auto im = noise_image(24, 24, 6);
  EXPECT_EQ(corpus::resize(im, 24), im);
}

TEST(Resize, ConstantStaysConstant) {
  for (const auto r = corpus::resize(constant_image(20, 20, 0.37), 57); double v : r.values()) EXPECT_NEAR(v, 0.37, 1e-15);
}

TEST(Resize, CheckerboardCornersAndInterior) {
  SoftMask m(2, 2);
  m.at(0, 1) = m.at(1, 0) = 1.0;
  const auto r = corpus::resize(m, 4);
  EXPECT_EQ(r.at(0, 0), 0.0);
  EXPECT_EQ(r.at(0, 3), 1.0);
  EXPECT_EQ(r.at(3, 0), 1.0);
  EXPECT_EQ(r.at(3, 3), 0.0);
  // (1,1) samples the source at (0.25, 0.25).
  EXPECT_NEAR(r.at(1, 1), 0.375, 1e-15);
}

TEST(Resize, ImageBelowMinimumThrows) { EXPECT_THROW(corpus::resize(ImageRGB(16, 16), 7), ArgumentError); }

TEST(Synthetic, SameSeedIsBitIdentical) {
  corpus::GenConfig cfg;
  const auto a = corpus::generate_synthetic_sample(11, 4, cfg);
  const auto b = corpus::generate_synthetic_sample(11, 4, cfg);
  EXPECT_EQ(a.composite, b.composite);
  EXPECT_EQ(a.mask, b.mask);
  EXPECT_EQ(a.background, b.background);
  EXPECT_EQ(a.sample_id, b.sample_id);
  EXPECT_NE(corpus::generate_synthetic_sample(12, 4, cfg).composite, a.composite);
}

TEST(Synthetic, CanvasBelowSixteenThrows) {
  corpus::GenConfig cfg;
  cfg.height = 15;
  Rng rng(0);
  EXPECT_THROW(corpus::generate_synthetic_sample(rng, cfg), ArgumentError);
}

TEST(Synthetic, AreaBoundsAndCompositeInvariant) {
  corpus::GenConfig cfg;
  double sum = 0.0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const auto s = corpus::generate_synthetic_sample(0, i, cfg);
    const double a = corpus::mask_area_fraction(s.mask);
    ASSERT_GE(a, 0.02);
    ASSERT_LE(a, 0.40);
    sum += a;
    if (i % 50 == 0) {
      const auto expect = corpus::composite(s.background, s.foreground, s.mask);
      for (std::size_t k = 0; k < expect.size(); ++k) ASSERT_NEAR(expect.values()[k], s.composite.values()[k], 1.0 / 255);
    }
  }
  const double mean = sum / n;
  EXPECT_GE(mean, 0.05);
  EXPECT_LE(mean, 0.35);
}

TEST(Synthetic, EveryShapeAndTextureFamilyGenerates) {
  for (auto shape : {corpus::ShapeFamily::kEllipse, corpus::ShapeFamily::kPolygon, corpus::ShapeFamily::kTexturedPatch}) {
    for (auto tex : {corpus::TextureFamily::kLinearGradient, corpus::TextureFamily::kPerlinNoise,
                     corpus::TextureFamily::kFlatVignette}) {
      corpus::GenConfig cfg;
      cfg.shape = shape;
      cfg.texture = tex;
      const auto s = corpus::generate_synthetic_sample(3, 0, cfg);
      EXPECT_GT(corpus::mask_area_fraction(s.mask), 0.0);
      for (double v : s.composite.values()) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
      }
      EXPECT_EQ(corpus::parse_shape_family(corpus::to_string(shape)), shape);
      EXPECT_EQ(corpus::parse_texture_family(corpus::to_string(tex)), tex);
    }
  }
}

TEST(GenConfigJson, RoundTripAndUnknownKey) {
  corpus::GenConfig cfg;
  cfg.height = 32;
  cfg.feather_radius = 2.5;
  const auto back = corpus::GenConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.to_json(), cfg.to_json());
  auto j = cfg.to_json();
  j["colour"] = 1;
  EXPECT_THROW(corpus::GenConfig::from_json(j), ConfigError);
}

namespace {

corpus::DatasetManifest fake_source(const std::string& prefix, int n, const fs::path& root) {
  corpus::DatasetManifest m;
  m.root = root;
  for (int i = 0; i < n; ++i) {
    corpus::SampleEntry e;
    e.id = prefix + std::to_string(i);
    e.composite = "composite/" + e.id + ".png";
    e.mask = "mask/" + e.id + ".png";
    m.samples.push_back(e);
  }
  return m;
}

}  // namespace

TEST(Manifest, RoundTripsThroughDisk) {
  const fs::path dir = scratch("manifest");
  corpus::DatasetManifest m = fake_source("x", 3, dir);
  m.seed = 42;
  m.split = "val";
  m.samples[1].harmonized["recipe"] = "harmonized/recipe/x1.png";
  m.samples[1].params["recipe"] = {{"preset", "warmer"}};
  corpus::write_manifest(m);
  const auto back = corpus::read_manifest(dir);
  EXPECT_EQ(back, m);
  EXPECT_EQ(corpus::dump_manifest(back), corpus::dump_manifest(m));
}

TEST(Manifest, ValidateFindsDuplicatesAndMissingFiles) {
  const fs::path dir = scratch("validate");
  auto m = fake_source("y", 2, dir);
  EXPECT_THROW(m.validate(true), Error);
  EXPECT_NO_THROW(m.validate(false));
  m.samples[1].id = m.samples[0].id;
  EXPECT_THROW(m.validate(false), Error);
}

TEST(TestSuite, FourSourcesOfTwentyFive) {
  std::vector<corpus::DatasetManifest> src;
  for (const char* p : {"a", "b", "c", "d"}) src.push_back(fake_source(p, 40, "/data"));
  const auto suite = corpus::build_test_suite(src, 25, 7);
  EXPECT_EQ(suite.samples.size(), 100u);
  EXPECT_EQ(suite.split, "test");
  std::set<std::string> ids;
  for (const auto& e : suite.samples) ids.insert(e.id);
  EXPECT_EQ(ids.size(), 100u);
  const auto again = corpus::build_test_suite(src, 25, 7);
  EXPECT_EQ(suite, again);
  EXPECT_NE(corpus::build_test_suite(src, 25, 8).samples, suite.samples);
}

TEST(TestSuite, ZeroIsEmptyAndShortSourceNamed) {
  std::vector<corpus::DatasetManifest> src{fake_source("a", 5, "/data"), fake_source("b", 3, "/other")};
  EXPECT_TRUE(corpus::build_test_suite(src, 0, 1).samples.empty());
  try {
    corpus::build_test_suite(src, 4, 1);
    FAIL() << "expected CapacityError";
  } catch (const CapacityError& e) {
    EXPECT_NE(std::string(e.what()).find("/other"), std::string::npos) << e.what();
  }
}

TEST(IHarmony4, LoadsSubsetLayout) {
  const fs::path root = scratch("ih4");
  const fs::path sub = root / "HCOCO";
  save_png(sub / "real_images" / "c1.jpg", constant_image(8, 8, 0.5));
  save_png(sub / "masks" / "c1_2.png", SoftMask(8, 8, 1.0));
  save_png(sub / "composite_images" / "c1_2_1.jpg", constant_image(8, 8, 0.4));
  save_png(sub / "composite_images" / "c1_2_3.jpg", constant_image(8, 8, 0.6));
  std::ofstream(sub / "HCOCO_test.txt") << "c1_2_1.jpg\n";
  const auto m = corpus::load_iharmony4(root, "HCOCO", "test");
  ASSERT_EQ(m.samples.size(), 1u);
  EXPECT_EQ(m.samples[0].source_tag, "hcoco");
  EXPECT_NO_THROW(m.validate(true));
  // Without an id list every composite is listed.
  const auto all = corpus::load_iharmony4(root, "HCOCO", "train");
  EXPECT_EQ(all.samples.size(), 2u);
}
