#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "lightsplice/model.hpp"
#include "lightsplice/raster.hpp"

namespace lightsplice::bench {

struct DetectorInput {
  const ImageRGB& image;
  const std::string& sample_id;
  const std::string& method;     // row of the grid ("composite", "filter_chain", ..., "real")
  const BinaryMask* gt = nullptr;  // only the oracle looks at it
};

// Wraps any forensic method as image -> score map at input resolution.
// Returning nullopt declines the input (no detection).
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::string name() const = 0;
  virtual std::optional<ScoreMap> score(const DetectorInput& in) = 0;
  // Stateful detectors must be run serially and in suite order.
  virtual bool stateful() const { return false; }
};

// Emits the ground-truth mask as scores.
class OracleDetector final : public Detector {
 public:
  std::string name() const override { return "oracle"; }
  std::optional<ScoreMap> score(const DetectorInput& in) override;
};

class ConstantDetector final : public Detector {
 public:
  explicit ConstantDetector(double value);
  std::string name() const override { return name_; }
  std::optional<ScoreMap> score(const DetectorInput& in) override;

 private:
  double value_;
  std::string name_;
};

// i.i.d. uniform scores, seeded per (seed, sample id, method) so results do
// not depend on evaluation order.
class UniformRandomDetector final : public Detector {
 public:
  explicit UniformRandomDetector(std::uint64_t seed) : seed_(seed) {}
  std::string name() const override { return "random"; }
  std::optional<ScoreMap> score(const DetectorInput& in) override;

 private:
  std::uint64_t seed_;
};

// Non-learned reference: local energy of the luma high-pass residual
// (image minus its 3x3 box blur), normalized to [0,1] per image.
class HighPassDetector final : public Detector {
 public:
  std::string name() const override { return "highpass"; }
  std::optional<ScoreMap> score(const DetectorInput& in) override;
};

class ModelDetector final : public Detector {
 public:
  ModelDetector(model::SegModelParams params, std::string name = "segnet")
      : params_(std::move(params)), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  std::optional<ScoreMap> score(const DetectorInput& in) override;
  const model::SegModelParams& params() const { return params_; }

 private:
  model::SegModelParams params_;
  std::string name_;
};

// Reads scores produced offline by an external network:
//   <root>/<name>/<method>/<id>.png, falling back to <root>/<name>/<id>.png.
// 8-bit grayscale, 0 -> 0.0, 255 -> 1.0. A missing file is a declined input.
class ExternalScoreDetector final : public Detector {
 public:
  ExternalScoreDetector(std::filesystem::path root, std::string name)
      : root_(std::move(root)), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  std::optional<ScoreMap> score(const DetectorInput& in) override;

 private:
  std::filesystem::path root_;
  std::string name_;
};

// oracle, const0, const1, const0.5, random, highpass.
std::unique_ptr<Detector> make_builtin_detector(const std::string& name, std::uint64_t seed = 0);

}  // namespace lightsplice::bench
