#include "lightsplice/detectors.hpp"

#include <algorithm>
#include <cstdio>

#include "lightsplice/error.hpp"
#include "lightsplice/filters.hpp"
#include "lightsplice/image_io.hpp"
#include "lightsplice/random.hpp"

namespace lightsplice::bench {

std::optional<ScoreMap> OracleDetector::score(const DetectorInput& in) {
  if (in.gt == nullptr) throw ArgumentError("oracle detector needs the ground-truth mask");
  return retag<ScoreTag>(binarize(*in.gt));
}

ConstantDetector::ConstantDetector(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) throw ArgumentError("constant detector value must lie in [0,1]");
  char buf[32];
  std::snprintf(buf, sizeof buf, "const%g", value);
  name_ = buf;
}

std::optional<ScoreMap> ConstantDetector::score(const DetectorInput& in) {
  return ScoreMap(in.image.height(), in.image.width(), value_);
}

std::optional<ScoreMap> UniformRandomDetector::score(const DetectorInput& in) {
  Rng rng(derive_seed(seed_, fnv1a64(in.method + "/" + in.sample_id)));
  ScoreMap out(in.image.height(), in.image.width());
  for (double& v : out.values()) v = rng.uniform();
  return out;
}

std::optional<ScoreMap> HighPassDetector::score(const DetectorInput& in) {
  const auto lum = luma_plane<ScoreTag>(in.image);
  const auto low = box_blur(lum, 1);
  ScoreMap residual(lum.height(), lum.width());
  for (std::size_t i = 0; i < residual.size(); ++i) {
    const double r = lum.values()[i] - low.values()[i];
    residual.values()[i] = r * r;
  }
  ScoreMap energy = box_blur(residual, 2);
  const double peak = *std::max_element(energy.values().begin(), energy.values().end());
  for (double& v : energy.values()) v = peak > 0.0 ? std::clamp(v / peak, 0.0, 1.0) : 0.0;
  return energy;
}

std::optional<ScoreMap> ModelDetector::score(const DetectorInput& in) {
  return model::predict(params_, in.image);
}

std::optional<ScoreMap> ExternalScoreDetector::score(const DetectorInput& in) {
  for (const auto& p : {root_ / name_ / in.method / (in.sample_id + ".png"), root_ / name_ / (in.sample_id + ".png")}) {
    if (!std::filesystem::exists(p)) continue;
    ScoreMap s = load_score_png(p);
    if (!s.same_shape(in.image)) s = resize_bilinear(s, in.image.height(), in.image.width());
    return s;
  }
  return std::nullopt;
}

std::unique_ptr<Detector> make_builtin_detector(const std::string& name, std::uint64_t seed) {
  if (name == "oracle") return std::make_unique<OracleDetector>();
  if (name == "const0") return std::make_unique<ConstantDetector>(0.0);
  if (name == "const1") return std::make_unique<ConstantDetector>(1.0);
  if (name == "const0.5") return std::make_unique<ConstantDetector>(0.5);
  if (name == "random") return std::make_unique<UniformRandomDetector>(seed);
  if (name == "highpass") return std::make_unique<HighPassDetector>();
  throw LookupError("unknown built-in detector '" + name + "'");
}

}  // namespace lightsplice::bench
