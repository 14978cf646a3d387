#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lightsplice/raster.hpp"

namespace lightsplice::metrics {

// A per-image metric value, or a skip with its reason (e.g. an AUC on a
// single-class ground truth).
struct MetricValue {
  std::optional<double> value;
  std::string skip_reason;

  static MetricValue of(double v) { return {v, {}}; }
  static MetricValue skip(std::string reason) { return {std::nullopt, std::move(reason)}; }
  bool skipped() const { return !value.has_value(); }
};

inline constexpr const char* kUndefinedAuc = "undefined_auc";
inline constexpr const char* kDeclined = "declined";

// Pixel ROC AUC in the Mann-Whitney form with midrank ties. Ground truth is
// binarized at 0.5. Single-class ground truth yields a kUndefinedAuc skip.
MetricValue roc_auc(const ScoreMap& scores, const BinaryMask& gt);

// AUC over the union of all pixels of all images (global pooling).
MetricValue roc_auc_pooled(std::span<const ScoreMap> scores, std::span<const BinaryMask> gts);

// Two-class mean IoU; a class absent from both masks has IoU 1.
double miou(const BinaryMask& pred, const BinaryMask& gt);

// pixel >= t -> 1, else 0. t must lie in [0, 1].
BinaryMask threshold(const ScoreMap& scores, double t = 0.5);

struct ThresholdSweep {
  std::vector<double> thresholds;  // 0.05, 0.10, ..., 0.95
  std::vector<double> mean_miou;
  double best_threshold = 0.5;
  double best_miou = 0.0;
};

ThresholdSweep sweep_thresholds(std::span<const ScoreMap> scores, std::span<const BinaryMask> gts);

// SSIM on luma: 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2, C2 = 0.03^2,
// averaged over all window positions fully inside the image.
double ssim(const ImageRGB& a, const ImageRGB& b);

enum class SkipPolicy { kSkip, kAsZero };

struct MetricResult {
  std::string name;
  std::vector<MetricValue> per_image;
  double mean = 0.0;
  int valid = 0;
  int skipped = 0;
  std::vector<std::string> skip_reasons;
};

// Arithmetic mean over non-skipped values, summed left to right. With
// kAsZero, skips contribute 0 instead. Throws NoValidImagesError when nothing
// remains to average.
MetricResult aggregate(std::string name, std::vector<MetricValue> per_image,
                       SkipPolicy policy = SkipPolicy::kSkip);

struct RocCurve {
  std::vector<double> fpr;
  std::vector<double> tpr;
};

// Pooled ROC curve, at most max_points vertices (always including the
// endpoints).
RocCurve roc_curve(std::span<const ScoreMap> scores, std::span<const BinaryMask> gts,
                   std::size_t max_points = 512);

}  // namespace lightsplice::metrics
