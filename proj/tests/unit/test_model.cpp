#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "lightsplice/dataset.hpp"
#include "lightsplice/error.hpp"
#include "lightsplice/model.hpp"
#include "lightsplice/random.hpp"
#include "lightsplice/train.hpp"

namespace fs = std::filesystem;
using namespace lightsplice;
using namespace lightsplice::model;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lightsplice_model_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SegNetConfig tiny(int side = 16, int depth = 2, int base = 4, std::uint64_t seed = 3) {
  SegNetConfig c;
  c.input_side = side;
  c.depth = depth;
  c.base_channels = base;
  c.seed = seed;
  return c;
}

ImageRGB random_image(int side, Rng& rng) {
  ImageRGB im(side, side);
  for (double& v : im.values()) v = rng.uniform();
  return im;
}

// A bright square on a darker noisy field; the target marks the square.
Example square_example(int side, Rng& rng) {
  Example e{ImageRGB(side, side), SoftMask(side, side, 0.0)};
  const int lo = 2 + static_cast<int>(rng.below(side / 2 - 2));
  const int hi = lo + side / 4 + static_cast<int>(rng.below(side / 4));
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const bool in = y >= lo && y < hi && x >= lo && x < hi;
      for (int c = 0; c < 3; ++c) e.image.at(y, x, c) = std::clamp((in ? 0.75 : 0.3) + 0.05 * rng.normal(), 0.0, 1.0);
      e.target.at(y, x) = in ? 1.0 : 0.0;
    }
  }
  return e;
}

}  // namespace

TEST(Config, ValidationAndBottleneck) {
  EXPECT_EQ(SegNetConfig{}.bottleneck_side(), 8);
  EXPECT_THROW(tiny(20, 3).validate(), ConfigError);
  EXPECT_THROW(tiny(16, 1).validate(), ConfigError);
  EXPECT_THROW(init_model(tiny(16, 5)), ConfigError);
  EXPECT_EQ(SegNetConfig::from_json(tiny().to_json()), tiny());
}

TEST(Init, DeterministicAndFinite) {
  const auto a = init_model(tiny());
  EXPECT_EQ(a, init_model(tiny()));
  EXPECT_NE(a, init_model(tiny(16, 2, 4, 4)));
  EXPECT_TRUE(a.all_finite());
  const auto s = forward(a, ImageRGB(16, 16, 0.0));
  for (double v : s.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Forward, RangeShapeDeterminism) {
  const auto p = init_model(tiny(32, 3, 4));
  Rng rng(1);
  const auto im = random_image(32, rng);
  const auto s = forward(p, im);
  ASSERT_TRUE(s.same_shape(32, 32));
  for (double v : s.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_EQ(forward(p, im), s);
  EXPECT_THROW(forward(p, random_image(16, rng)), DimensionError);
}

TEST(Forward, DefaultConfigRunsAt128) {
  const auto p = init_model(SegNetConfig{});
  Rng rng(2);
  const auto s = forward(p, random_image(128, rng));
  EXPECT_TRUE(s.same_shape(128, 128));
}

TEST(Predict, ResizesBothWays) {
  const auto p = init_model(tiny(32, 3, 4));
  Rng rng(3);
  const auto im = random_image(32, rng);
  EXPECT_EQ(predict(p, im), forward(p, im));
  ImageRGB wide(384, 512, 0.4);
  const auto s = predict(p, wide);
  EXPECT_EQ(s.height(), 384);
  EXPECT_EQ(s.width(), 512);
  const auto [lo, hi] = std::minmax_element(s.values().begin(), s.values().end());
  EXPECT_TRUE(std::isfinite(*hi - *lo));
}

TEST(Loss, ClosedForms) {
  SoftMask half(4, 4, 0.0);
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 4; ++y) half.at(y, x) = 1.0;
  EXPECT_NEAR(loss(ScoreMap(4, 4, 0.5), half).bce, std::log(2.0), 1e-12);

  const auto zero = loss(ScoreMap(4, 4, 0.0), SoftMask(4, 4, 0.0));
  EXPECT_NEAR(zero.dice, 0.0, 1e-6);

  const double eps = 1e-7;
  ScoreMap near(4, 4);
  for (std::size_t i = 0; i < near.size(); ++i) near.values()[i] = half.values()[i] ? 1.0 - eps : eps;
  const auto good = loss(near, half);
  EXPECT_LE(good.dice, 0.01);
  EXPECT_LT(good.bce, 1e-6);
  EXPECT_GE(good.total, 0.0);
  EXPECT_THROW(loss(ScoreMap(4, 4), SoftMask(4, 5)), DimensionError);
}

TEST(Loss, Bounds) {
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    ScoreMap s(8, 8);
    SoftMask t(8, 8);
    for (double& v : s.values()) v = rng.uniform();
    for (double& v : t.values()) v = rng.coin() ? 1.0 : 0.0;
    const auto l = loss(s, t);
    EXPECT_GE(l.bce, 0.0);
    EXPECT_GE(l.dice, 0.0);
    EXPECT_LE(l.dice, 1.0);
    EXPECT_NEAR(l.total, l.bce + l.dice, 1e-12);
  }
}

TEST(Gradient, ShapesMatchParameters) {
  const auto p = init_model(tiny());
  Rng rng(5);
  const auto g = grad(p, {square_example(16, rng)});
  ASSERT_EQ(g.gradients.size(), p.tensors.size());
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    EXPECT_EQ(g.gradients[i].name, p.tensors[i].name);
    EXPECT_EQ(g.gradients[i].shape, p.tensors[i].shape);
    EXPECT_EQ(g.gradients[i].values.size(), p.tensors[i].values.size());
  }
  EXPECT_THROW(grad(p, {}), Error);
}

TEST(Gradient, HeadBiasStationaryWhenTargetIsPrediction) {
  const auto p = init_model(tiny());
  Rng rng(6);
  const auto im = random_image(16, rng);
  const auto s = forward(p, im);
  SoftMask t(16, 16);
  for (std::size_t i = 0; i < t.size(); ++i) t.values()[i] = s.values()[i];
  LossConfig bce_only;
  bce_only.dice_weight = 0.0;
  const auto g = grad(p, {{im, t}}, bce_only);
  const auto& head_bias = g.gradients.back();
  ASSERT_EQ(head_bias.values.size(), 1u);
  EXPECT_NEAR(head_bias.values[0], 0.0, 1e-12);
}

TEST(Gradient, MatchesCentralDifferences) {
  auto p = init_model(tiny(16, 2, 4, 11));
  Rng rng(7);
  const std::vector<Example> batch{square_example(16, rng), square_example(16, rng)};
  const auto g = grad(p, batch);
  const double h = 1e-4;
  int checked = 0;
  for (std::size_t t = 0; t < p.tensors.size(); ++t) {
    for (int k = 0; k < 3; ++k) {
      const std::size_t i = rng.below(p.tensors[t].values.size());
      double& w = p.tensors[t].values[i];
      const double keep = w;
      w = keep + h;
      const double up = batch_loss(p, batch);
      w = keep - h;
      const double down = batch_loss(p, batch);
      w = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = g.gradients[t].values[i];
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      EXPECT_LT(std::abs(numeric - analytic) / scale, 1e-3) << p.tensors[t].name << "[" << i << "]";
      ++checked;
    }
  }
  EXPECT_GE(checked, 20);
}

TEST(Gradient, NonFiniteLossIsTrainingError) {
  const auto p = init_model(tiny());
  ImageRGB bad(16, 16, 0.5);
  bad.at(3, 3, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(grad(p, {{bad, SoftMask(16, 16, 0.0)}}), TrainingError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const fs::path dir = scratch("ckpt");
  auto p = init_model(tiny(32, 3, 4));
  p.provenance = {"A", "B"};
  save_checkpoint(p, dir / "m.ckpt");
  const auto q = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(q, p);
  Rng rng(8);
  const auto im = random_image(32, rng);
  EXPECT_EQ(forward(q, im), forward(p, im));
}

TEST(Checkpoint, CorruptFilesRejected) {
  const fs::path dir = scratch("bad");
  std::ofstream(dir / "junk.ckpt") << "definitely not a checkpoint";
  EXPECT_THROW(load_checkpoint(dir / "junk.ckpt"), DecodeError);
  save_checkpoint(init_model(tiny()), dir / "ok.ckpt");
  fs::resize_file(dir / "ok.ckpt", fs::file_size(dir / "ok.ckpt") - 5);
  EXPECT_THROW(load_checkpoint(dir / "ok.ckpt"), DecodeError);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), IoError);
}

TEST(Training, OneEpochOnSeparableBatchDescends) {
  Rng rng(9);
  std::vector<LabeledExample> data;
  for (int i = 0; i < 4; ++i) data.push_back({"x" + std::to_string(i), square_example(16, rng)});
  std::vector<Example> batch;
  for (const auto& d : data) batch.push_back(d.example);
  const auto p0 = init_model(tiny());
  TrainStageConfig st;
  st.epochs = 1;
  st.batch_size = 4;
  st.augment_flips = false;
  const auto r = train_on_examples(p0, data, st);
  EXPECT_LT(batch_loss(r.params, batch), batch_loss(p0, batch));
  EXPECT_EQ(r.params.provenance, std::vector<std::string>{"A"});
}

TEST(Training, SameSeedSameTrace) {
  Rng rng(10);
  std::vector<LabeledExample> data;
  for (int i = 0; i < 12; ++i) data.push_back({"x" + std::to_string(i), square_example(16, rng)});
  TrainStageConfig st;
  st.epochs = 3;
  st.batch_size = 4;
  const auto a = train_on_examples(init_model(tiny()), data, st);
  const auto b = train_on_examples(init_model(tiny()), data, st);
  EXPECT_EQ(a.report.step_losses, b.report.step_losses);
  EXPECT_EQ(a.report.loss_trace_csv(), b.report.loss_trace_csv());
  EXPECT_EQ(a.params, b.params);
  ASSERT_EQ(a.report.epochs.size(), 3u);
  for (int e = 0; e < 3; ++e) EXPECT_EQ(a.report.epochs[e].epoch, e + 1);
}

TEST(Training, OverfitsOneBatch) {
  Rng rng(11);
  std::vector<LabeledExample> data;
  for (int i = 0; i < 8; ++i) data.push_back({"x" + std::to_string(i), square_example(32, rng)});
  TrainStageConfig st;
  st.epochs = 200;
  st.batch_size = 8;
  st.augment_flips = false;
  st.learning_rate = 1e-2;
  const auto r = train_on_examples(init_model(tiny(32, 2, 8)), data, st);
  EXPECT_LT(r.report.step_losses.back(), 0.05);
}

TEST(Training, NanAbortsWithLastGoodCheckpoint) {
  const fs::path dir = scratch("nan");
  ImageRGB bad(16, 16, 0.5);
  bad.at(1, 1, 0) = std::numeric_limits<double>::quiet_NaN();
  std::vector<LabeledExample> data{{"bad", {bad, SoftMask(16, 16, 0.0)}}};
  TrainStageConfig st;
  st.epochs = 1;
  st.checkpoint_dir = dir;
  try {
    train_on_examples(init_model(tiny()), data, st);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    ASSERT_FALSE(e.last_good_checkpoint().empty());
    EXPECT_TRUE(fs::exists(e.last_good_checkpoint()));
    EXPECT_NO_THROW(load_checkpoint(e.last_good_checkpoint()));
  }
}

TEST(StageConfig, JsonRoundTripAndUnknownKeys) {
  TrainStageConfig st;
  st.name = "B";
  st.methods = {"physics"};
  st.epochs = 4;
  st.learning_rate = 5e-4;
  const auto back = TrainStageConfig::from_json(st.to_json());
  EXPECT_EQ(back.to_json(), st.to_json());
  auto j = st.to_json();
  j["momentum"] = 0.9;
  EXPECT_THROW(TrainStageConfig::from_json(j), ConfigError);
  st.epochs = 0;
  EXPECT_THROW(st.validate(), ConfigError);
}

TEST(Pipeline, PresetsAndOverrides) {
  const auto desk = PipelineConfig::preset("desk-scale");
  EXPECT_EQ(desk.model.input_side, 64);
  ASSERT_EQ(desk.stages.size(), 3u);
  EXPECT_EQ(desk.stages[0].name, "A");
  EXPECT_EQ(desk.stages[0].epochs, 10);
  EXPECT_EQ(desk.stages[1].name, "B");
  EXPECT_EQ(desk.stages[1].methods, std::vector<std::string>{"physics"});
  EXPECT_EQ(desk.stages[2].epochs, 5);
  const auto full = PipelineConfig::preset("paper-scale");
  EXPECT_EQ(full.model.input_side, 512);
  EXPECT_EQ(full.stages[0].epochs, 100);
  EXPECT_EQ(full.stages[1].epochs, 50);
  EXPECT_THROW(PipelineConfig::preset("huge"), ConfigError);

  const auto c = PipelineConfig::from_json(
      {{"profile", "desk-scale"}, {"stages", {{{"name", "A"}, {"epochs", 2}}, {{"name", "C"}}}}});
  ASSERT_EQ(c.stages.size(), 2u);
  EXPECT_EQ(c.stages[0].epochs, 2);
  EXPECT_EQ(c.stages[1].methods, std::vector<std::string>{"recipe"});
  EXPECT_THROW(PipelineConfig::from_json({{"optimizer", "sgd"}}), ConfigError);
}

TEST(Pipeline, MissingManifestIsConfigError) {
  auto c = PipelineConfig::preset("desk-scale");
  for (auto& s : c.stages) s.manifest = "/nonexistent/dataset";
  EXPECT_THROW(train_pipeline(c), ConfigError);
}

TEST(LoadExamples, RealFractionAddsEmptyTargets) {
  harmonize::DatasetSpec spec;
  spec.out = std::filesystem::temp_directory_path() / "lightsplice_model_reals";
  std::filesystem::remove_all(spec.out);
  spec.n = 8;
  spec.gen.height = spec.gen.width = 32;
  spec.families = {harmonize::Method::kFilterChain};
  const auto m = harmonize::generate_dataset(spec);
  EXPECT_EQ(load_examples(m, {"filter_chain"}, false, 32).size(), 8u);
  const auto half = load_examples(m, {"filter_chain"}, false, 32, 0, 0.5);
  ASSERT_EQ(half.size(), 12u);
  int reals = 0;
  for (const auto& ex : half) {
    if (ex.id.ends_with("/real")) {
      ++reals;
      for (double v : ex.example.target.values()) EXPECT_EQ(v, 0.0);
    }
  }
  EXPECT_EQ(reals, 4);
  EXPECT_EQ(load_examples(m, {"filter_chain"}, true, 32, 0, 1.0).size(), 24u);
  EXPECT_THROW(load_examples(m, {"filter_chain"}, false, 32, 0, 1.5), ConfigError);
  EXPECT_EQ(PipelineConfig::preset("desk-scale").stages[2].real_fraction, 0.5);
}
