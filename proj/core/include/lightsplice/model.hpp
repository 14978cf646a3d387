#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lightsplice/raster.hpp"

namespace lightsplice::model {

// U-Net style encoder-decoder: per level two 3x3 convolutions with SiLU,
// 2x2 average pooling down, nearest 2x upsampling and skip concatenation
// up, and a 1x1 head with a sigmoid.
struct SegNetConfig {
  int input_side = 128;
  int depth = 4;          // number of 2x downsampling stages
  int base_channels = 16;  // doubles per level
  std::uint64_t seed = 0;

  void validate() const;  // ConfigError
  int bottleneck_side() const { return input_side >> depth; }

  nlohmann::json to_json() const;
  static SegNetConfig from_json(const nlohmann::json& j);

  friend bool operator==(const SegNetConfig&, const SegNetConfig&) = default;
};

struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;

  friend bool operator==(const ParamTensor&, const ParamTensor&) = default;
};

using ParamSet = std::vector<ParamTensor>;

struct SegModelParams {
  SegNetConfig config;
  ParamSet tensors;
  // Training stages applied so far, in order (e.g. {"A", "B"}).
  std::vector<std::string> provenance;

  std::size_t num_values() const;
  bool all_finite() const;

  friend bool operator==(const SegModelParams&, const SegModelParams&) = default;
};

// Zero-valued tensors with the same names and shapes.
ParamSet zeros_like(const ParamSet& params);

// He-scaled normal weights, zero biases; deterministic in config.seed.
SegModelParams init_model(const SegNetConfig& config);

// Post-sigmoid edit probabilities. The image must be input_side square.
ScoreMap forward(const SegModelParams& params, const ImageRGB& image);

// Resize to input_side, run forward, and upsample scores back bilinearly.
ScoreMap predict(const SegModelParams& params, const ImageRGB& image);

struct LossConfig {
  double dice_weight = 1.0;
  double dice_smoothing = 1.0;
};

struct LossTerms {
  double bce = 0.0;
  double dice = 0.0;
  double total = 0.0;
};

// Mean BCE plus weighted smoothed Dice loss. Scores are clipped to
// [1e-7, 1 - 1e-7] inside the logarithms.
LossTerms loss(const ScoreMap& score, const SoftMask& target, const LossConfig& config = {});

struct Example {
  ImageRGB image;   // input_side square
  SoftMask target;  // same shape
};

struct GradientResult {
  double loss = 0.0;  // mean over the batch
  ParamSet gradients;
};

// Exact reverse-mode gradient of the batch-mean loss. Throws TrainingError
// if the loss is not finite.
GradientResult grad(const SegModelParams& params, const std::vector<Example>& batch,
                    const LossConfig& config = {});

// Batch-mean loss only (used by finite-difference checks).
double batch_loss(const SegModelParams& params, const std::vector<Example>& batch,
                  const LossConfig& config = {});

// Binary container: magic, format version, JSON header (config, provenance,
// tensor names and shapes), then little-endian float64 values.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(const SegModelParams& params, const std::filesystem::path& path);
SegModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace lightsplice::model
