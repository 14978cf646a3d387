#include <benchmark/benchmark.h>

#include "lightsplice/corpus.hpp"
#include "lightsplice/harmonize.hpp"
#include "lightsplice/metrics.hpp"
#include "lightsplice/model.hpp"
#include "lightsplice/random.hpp"

using namespace lightsplice;

namespace {

ImageRGB noise(int side, std::uint64_t seed) {
  Rng rng(seed);
  ImageRGB im(side, side);
  for (double& v : im.values()) v = rng.uniform();
  return im;
}

void BM_Forward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto p = model::init_model({side, 3, 8, 1});
  const auto im = noise(side, 2);
  for (auto _ : state) benchmark::DoNotOptimize(model::forward(p, im));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Gradient(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto p = model::init_model({side, 3, 8, 1});
  std::vector<model::Example> batch;
  for (int i = 0; i < 8; ++i) {
    SoftMask m(side, side, 0.0);
    for (int y = side / 4; y < side / 2; ++y)
      for (int x = side / 4; x < side / 2; ++x) m.at(y, x) = 1.0;
    batch.push_back({noise(side, 10 + i), m});
  }
  for (auto _ : state) benchmark::DoNotOptimize(model::grad(p, batch));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_Gradient)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_RocAuc(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  Rng rng(3);
  ScoreMap s(side, side);
  BinaryMask g(side, side);
  for (double& v : s.values()) v = rng.uniform();
  for (double& v : g.values()) v = rng.uniform() < 0.2 ? 1.0 : 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(metrics::roc_auc(s, g));
}
BENCHMARK(BM_RocAuc)->Arg(64)->Arg(256)->Arg(512);

void BM_Ssim(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto a = noise(side, 4), b = noise(side, 5);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(64)->Arg(256);

void BM_GenerateSample(benchmark::State& state) {
  corpus::GenConfig cfg;
  cfg.height = cfg.width = static_cast<int>(state.range(0));
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(corpus::generate_synthetic_sample(6, i++, cfg));
}
BENCHMARK(BM_GenerateSample)->Arg(64)->Arg(256);

void BM_Harmonize(benchmark::State& state) {
  const auto method = static_cast<harmonize::Method>(state.range(0));
  corpus::GenConfig cfg;
  const auto s = corpus::generate_synthetic_sample(7, 0, cfg);
  Rng rng(8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(harmonize::harmonize_image(s.composite, s.mask, method, harmonize::Mode::kRandom, rng));
  }
  state.SetLabel(harmonize::to_string(method));
}
BENCHMARK(BM_Harmonize)->DenseRange(0, 2);

}  // namespace

// The packaged benchmark_main archive carries LTO bytecode from another
// compiler release, so main comes from the header instead.
BENCHMARK_MAIN();
