#include <gtest/gtest.h>

#include <cmath>

#include "lightsplice/error.hpp"
#include "lightsplice/metrics.hpp"
#include "lightsplice/random.hpp"
#include "oracles.hpp"

using namespace lightsplice;
using namespace lightsplice::metrics;

namespace {

ScoreMap random_scores(int h, int w, Rng& rng, int levels = 0) {
  ScoreMap s(h, w);
  for (double& v : s.values()) v = levels ? static_cast<double>(rng.below(levels)) / (levels - 1) : rng.uniform();
  return s;
}

BinaryMask random_mask(int h, int w, Rng& rng, double p = 0.3) {
  BinaryMask m(h, w);
  for (double& v : m.values()) v = rng.uniform() < p ? 1.0 : 0.0;
  return m;
}

ImageRGB random_image(int h, int w, Rng& rng) {
  ImageRGB im(h, w);
  for (double& v : im.values()) v = rng.uniform();
  return im;
}

}  // namespace

TEST(RocAuc, WorkedExample) {
  ScoreMap s(1, 4);
  BinaryMask g(1, 4);
  const double sv[] = {0.9, 0.8, 0.4, 0.3};
  const double gv[] = {1, 0, 1, 0};
  for (int i = 0; i < 4; ++i) {
    s.at(0, i) = sv[i];
    g.at(0, i) = gv[i];
  }
  EXPECT_DOUBLE_EQ(*roc_auc(s, g).value, 0.75);
  EXPECT_DOUBLE_EQ(oracle::pairwise_auc(s, g), 0.75);
}

TEST(RocAuc, PerfectConstantAndSingleClass) {
  Rng rng(1);
  const auto g = random_mask(16, 16, rng);
  EXPECT_EQ(*roc_auc(retag<ScoreTag>(g), g).value, 1.0);
  EXPECT_EQ(*roc_auc(ScoreMap(16, 16, 0.3), g).value, 0.5);
  const auto skip = roc_auc(ScoreMap(16, 16, 0.3), BinaryMask(16, 16, 0.0));
  EXPECT_TRUE(skip.skipped());
  EXPECT_EQ(skip.skip_reason, kUndefinedAuc);
  EXPECT_THROW(roc_auc(ScoreMap(8, 8), BinaryMask(8, 9)), DimensionError);
}

TEST(RocAuc, MatchesPairwiseOracle) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const auto s = random_scores(16, 16, rng, i % 2 ? 7 : 0);
    auto g = random_mask(16, 16, rng, 0.1 + 0.8 * rng.uniform());
    g.at(0, 0) = 1.0;
    g.at(0, 1) = 0.0;
    EXPECT_NEAR(*roc_auc(s, g).value, oracle::pairwise_auc(s, g), 1e-12);
  }
}

TEST(RocAuc, MonotoneInvarianceAndComplement) {
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto s = random_scores(16, 16, rng, i % 3 ? 0 : 5);
    auto g = random_mask(16, 16, rng);
    g.at(3, 3) = 1.0;
    g.at(4, 4) = 0.0;
    const double base = *roc_auc(s, g).value;
    ScoreMap cube = s, affine = s, flipped = s;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double v = s.values()[k];
      cube.values()[k] = v * v * v;
      affine.values()[k] = 0.1 + 0.8 * v;
      flipped.values()[k] = 1.0 - v;
    }
    EXPECT_NEAR(*roc_auc(cube, g).value, base, 1e-12);
    EXPECT_NEAR(*roc_auc(affine, g).value, base, 1e-12);
    EXPECT_NEAR(*roc_auc(flipped, g).value, 1.0 - base, 1e-12);
  }
}

TEST(RocAuc, PooledEqualsSingleImageOnConcatenation) {
  Rng rng(4);
  std::vector<ScoreMap> s{random_scores(8, 8, rng), random_scores(8, 8, rng)};
  std::vector<BinaryMask> g{random_mask(8, 8, rng), random_mask(8, 8, rng)};
  ScoreMap cs(16, 8);
  BinaryMask cg(16, 8);
  for (int k = 0; k < 2; ++k)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        cs.at(8 * k + y, x) = s[k].at(y, x);
        cg.at(8 * k + y, x) = g[k].at(y, x);
      }
  EXPECT_NEAR(*roc_auc_pooled(s, g).value, oracle::pairwise_auc(cs, cg), 1e-12);
}

TEST(Miou, Examples) {
  BinaryMask left(8, 8, 0.0), right(8, 8, 0.0), all(8, 8, 1.0);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) (x < 4 ? left : right).at(y, x) = 1.0;
  EXPECT_EQ(miou(left, left), 1.0);
  EXPECT_EQ(miou(left, right), 0.0);
  EXPECT_EQ(miou(all, right), 0.25);
  EXPECT_EQ(miou(BinaryMask(8, 8, 0.0), BinaryMask(8, 8, 0.0)), 1.0);
}

TEST(Miou, MatchesPixelCountingAndIsSymmetric) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_mask(16, 16, rng, rng.uniform());
    const auto g = random_mask(16, 16, rng, rng.uniform());
    EXPECT_EQ(miou(p, g), oracle::pixel_count_miou(p, g));
    EXPECT_EQ(miou(p, g), miou(g, p));
  }
}

TEST(Threshold, Boundaries) {
  Rng rng(6);
  const auto s = random_scores(8, 8, rng);
  for (const auto r = threshold(s, 0.0); double v : r.values()) EXPECT_EQ(v, 1.0);
  const double top = *std::max_element(s.values().begin(), s.values().end());
  for (const auto r = threshold(s, std::nextafter(top, 2.0)); double v : r.values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(threshold(s, 1.5), ArgumentError);
  EXPECT_THROW(threshold(s, -0.1), ArgumentError);
}

TEST(Threshold, SweepFindsCalibratedThreshold) {
  Rng rng(7);
  std::vector<ScoreMap> scores;
  std::vector<BinaryMask> gts;
  for (int i = 0; i < 10; ++i) {
    auto g = random_mask(16, 16, rng);
    ScoreMap s(16, 16);
    for (std::size_t k = 0; k < s.size(); ++k) {
      s.values()[k] = std::clamp((g.values()[k] ? 0.75 : 0.25) + 0.15 * rng.normal(), 0.0, 1.0);
    }
    scores.push_back(s);
    gts.push_back(g);
  }
  const auto sw = sweep_thresholds(scores, gts);
  EXPECT_EQ(sw.thresholds.size(), 19u);
  EXPECT_NEAR(sw.thresholds.front(), 0.05, 1e-12);
  EXPECT_NEAR(sw.thresholds.back(), 0.95, 1e-12);
  EXPECT_GE(sw.best_threshold, 0.3);
  EXPECT_LE(sw.best_threshold, 0.7);
}

TEST(Ssim, IdentityAndConstants) {
  Rng rng(8);
  const auto x = random_image(32, 32, rng);
  EXPECT_NEAR(ssim(x, x), 1.0, 1e-12);
  EXPECT_NEAR(ssim(ImageRGB(16, 16, 0.5), ImageRGB(16, 16, 0.5)), 1.0, 1e-12);
  EXPECT_THROW(ssim(ImageRGB(10, 16), ImageRGB(10, 16)), ArgumentError);
  EXPECT_THROW(ssim(ImageRGB(16, 16), ImageRGB(16, 17)), DimensionError);
}

TEST(Ssim, MatchesWindowedOracle) {
  Rng rng(9);
  const auto a = random_image(64, 64, rng);
  const auto b = random_image(64, 64, rng);
  EXPECT_NEAR(ssim(a, b), oracle::windowed_ssim(a, b), 1e-6);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_image(16, 16, rng);
    auto q = p;
    for (double& v : q.values()) v = std::clamp(v + 0.2 * rng.normal(), 0.0, 1.0);
    const double s = ssim(p, q);
    EXPECT_NEAR(s, oracle::windowed_ssim(p, q), 1e-6);
    EXPECT_NEAR(s, ssim(q, p), 1e-12);
    EXPECT_GT(s, -1.0);
    EXPECT_LT(s, 1.0);
  }
}

TEST(Aggregate, MeansCountsAndErrors) {
  auto r = aggregate("x", {MetricValue::of(1.0), MetricValue::of(0.0)});
  EXPECT_EQ(r.mean, 0.5);
  EXPECT_EQ(r.skipped, 0);
  r = aggregate("x", {MetricValue::of(0.8), MetricValue::skip(kUndefinedAuc), MetricValue::of(0.6)});
  EXPECT_NEAR(r.mean, 0.7, 1e-15);
  EXPECT_EQ(r.skipped, 1);
  EXPECT_EQ(r.valid, 2);
  ASSERT_EQ(r.skip_reasons.size(), 1u);
  EXPECT_EQ(r.skip_reasons[0], kUndefinedAuc);
  const auto z = aggregate("x", {MetricValue::of(0.8), MetricValue::skip(kDeclined)}, SkipPolicy::kAsZero);
  EXPECT_NEAR(z.mean, 0.4, 1e-15);
  EXPECT_THROW(aggregate("x", {MetricValue::skip(kDeclined)}), NoValidImagesError);
  EXPECT_THROW(aggregate("x", {}), NoValidImagesError);
}

TEST(Aggregate, MatchesIndependentSummation) {
  Rng rng(10);
  std::vector<MetricValue> v;
  double sum = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform();
    v.push_back(MetricValue::of(x));
    sum += x;
  }
  EXPECT_NEAR(aggregate("auc", v).mean, sum / 100, 1e-12);
}

TEST(RocCurve, EndpointsAndMonotone) {
  Rng rng(11);
  std::vector<ScoreMap> s{random_scores(16, 16, rng)};
  std::vector<BinaryMask> g{random_mask(16, 16, rng)};
  const auto c = roc_curve(s, g, 64);
  ASSERT_GE(c.fpr.size(), 2u);
  EXPECT_LE(c.fpr.size(), 64u);
  EXPECT_EQ(c.fpr.front(), 0.0);
  EXPECT_EQ(c.tpr.front(), 0.0);
  EXPECT_EQ(c.fpr.back(), 1.0);
  EXPECT_EQ(c.tpr.back(), 1.0);
  for (std::size_t i = 1; i < c.fpr.size(); ++i) {
    EXPECT_GE(c.fpr[i], c.fpr[i - 1]);
    EXPECT_GE(c.tpr[i], c.tpr[i - 1]);
  }
}
