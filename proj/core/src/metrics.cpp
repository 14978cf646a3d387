#include "lightsplice/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "lightsplice/error.hpp"
#include "lightsplice/filters.hpp"

namespace lightsplice::metrics {

namespace {

struct Labeled {
  double score;
  bool positive;
};

void collect(const ScoreMap& scores, const BinaryMask& gt, std::vector<Labeled>& out) {
  if (!scores.same_shape(gt)) throw DimensionError("score map and ground truth shapes differ");
  auto s = scores.values();
  auto g = gt.values();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isfinite(s[i])) throw ArgumentError("non-finite detector score");
    out.push_back({s[i], g[i] >= 0.5});
  }
}

MetricValue auc_of(std::vector<Labeled>& px) {
  double n_pos = 0.0;
  for (const auto& p : px) n_pos += p.positive ? 1.0 : 0.0;
  const double n_neg = static_cast<double>(px.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) return MetricValue::skip(kUndefinedAuc);

  std::sort(px.begin(), px.end(), [](const Labeled& a, const Labeled& b) { return a.score < b.score; });
  // Sum of midranks (1-based) of the positives.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < px.size()) {
    std::size_t j = i;
    double pos_in_group = 0.0;
    while (j < px.size() && px[j].score == px[i].score) {
      pos_in_group += px[j].positive ? 1.0 : 0.0;
      ++j;
    }
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    rank_sum += pos_in_group * midrank;
    i = j;
  }
  return MetricValue::of((rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg));
}

}  // namespace

MetricValue roc_auc(const ScoreMap& scores, const BinaryMask& gt) {
  std::vector<Labeled> px;
  px.reserve(scores.pixels());
  collect(scores, gt, px);
  return auc_of(px);
}

MetricValue roc_auc_pooled(std::span<const ScoreMap> scores, std::span<const BinaryMask> gts) {
  if (scores.size() != gts.size()) throw DimensionError("pooled AUC: score/gt count mismatch");
  std::vector<Labeled> px;
  for (std::size_t k = 0; k < scores.size(); ++k) collect(scores[k], gts[k], px);
  return auc_of(px);
}

double miou(const BinaryMask& pred, const BinaryMask& gt) {
  if (!pred.same_shape(gt)) throw DimensionError("miou: prediction and ground truth shapes differ");
  std::size_t inter[2] = {0, 0};
  std::size_t uni[2] = {0, 0};
  auto p = pred.values();
  auto g = gt.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool pf = p[i] >= 0.5;
    const bool gf = g[i] >= 0.5;
    inter[1] += pf && gf;
    uni[1] += pf || gf;
    inter[0] += !pf && !gf;
    uni[0] += !pf || !gf;
  }
  auto iou = [&](int k) {
    return uni[k] == 0 ? 1.0 : static_cast<double>(inter[k]) / static_cast<double>(uni[k]);
  };
  return 0.5 * (iou(0) + iou(1));
}

BinaryMask threshold(const ScoreMap& scores, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ArgumentError("threshold must lie in [0, 1]");
  BinaryMask out(scores.height(), scores.width());
  auto s = scores.values();
  auto d = out.values();
  for (std::size_t i = 0; i < s.size(); ++i) d[i] = s[i] >= t ? 1.0 : 0.0;
  return out;
}

ThresholdSweep sweep_thresholds(std::span<const ScoreMap> scores, std::span<const BinaryMask> gts) {
  if (scores.size() != gts.size()) throw DimensionError("sweep: score/gt count mismatch");
  if (scores.empty()) throw NoValidImagesError("sweep: no images");
  ThresholdSweep sweep;
  for (int k = 1; k <= 19; ++k) {
    const double t = 0.05 * k;
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) sum += miou(threshold(scores[i], t), gts[i]);
    const double mean = sum / static_cast<double>(scores.size());
    sweep.thresholds.push_back(t);
    sweep.mean_miou.push_back(mean);
    if (k == 1 || mean > sweep.best_miou) {
      sweep.best_miou = mean;
      sweep.best_threshold = t;
    }
  }
  return sweep;
}

double ssim(const ImageRGB& a, const ImageRGB& b) {
  if (!a.same_shape(b)) throw DimensionError("ssim: image shapes differ");
  constexpr int kWin = 11;
  if (a.height() < kWin || a.width() < kWin) {
    throw ArgumentError("ssim: images must be at least 11x11");
  }
  const auto taps = gaussian_kernel(1.5);
  const auto x = luma_plane(a);
  const auto y = luma_plane(b);
  const int h = a.height(), w = a.width();
  const int oh = h - kWin + 1, ow = w - kWin + 1;

  // Horizontal pass (valid) of x, y, x^2, y^2, xy; then vertical.
  std::vector<double> hx(static_cast<std::size_t>(h) * ow), hy(hx.size()), hxx(hx.size()),
      hyy(hx.size()), hxy(hx.size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < ow; ++c) {
      double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      for (int k = 0; k < kWin; ++k) {
        const double u = x.at(r, c + k), v = y.at(r, c + k), g = taps[k];
        sx += g * u;
        sy += g * v;
        sxx += g * u * u;
        syy += g * v * v;
        sxy += g * u * v;
      }
      const std::size_t i = static_cast<std::size_t>(r) * ow + c;
      hx[i] = sx, hy[i] = sy, hxx[i] = sxx, hyy[i] = syy, hxy[i] = sxy;
    }
  }
  constexpr double C1 = 0.01 * 0.01;
  constexpr double C2 = 0.03 * 0.03;
  double total = 0.0;
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      double mx = 0, my = 0, exx = 0, eyy = 0, exy = 0;
      for (int k = 0; k < kWin; ++k) {
        const std::size_t i = static_cast<std::size_t>(r + k) * ow + c;
        const double g = taps[k];
        mx += g * hx[i];
        my += g * hy[i];
        exx += g * hxx[i];
        eyy += g * hyy[i];
        exy += g * hxy[i];
      }
      const double vx = exx - mx * mx, vy = eyy - my * my, cxy = exy - mx * my;
      total += ((2 * mx * my + C1) * (2 * cxy + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2));
    }
  }
  return total / (static_cast<double>(oh) * ow);
}

MetricResult aggregate(std::string name, std::vector<MetricValue> per_image, SkipPolicy policy) {
  MetricResult r;
  r.name = std::move(name);
  double sum = 0.0;
  for (const auto& v : per_image) {
    if (v.skipped()) {
      ++r.skipped;
      r.skip_reasons.push_back(v.skip_reason);
      if (policy == SkipPolicy::kAsZero) ++r.valid;
      continue;
    }
    sum += *v.value;
    ++r.valid;
  }
  r.per_image = std::move(per_image);
  if (r.valid == 0) throw NoValidImagesError("metric '" + r.name + "': no valid images to aggregate");
  r.mean = sum / static_cast<double>(r.valid);
  return r;
}

RocCurve roc_curve(std::span<const ScoreMap> scores, std::span<const BinaryMask> gts,
                   std::size_t max_points) {
  std::vector<Labeled> px;
  for (std::size_t k = 0; k < scores.size(); ++k) collect(scores[k], gts[k], px);
  std::sort(px.begin(), px.end(), [](const Labeled& a, const Labeled& b) { return a.score > b.score; });
  double n_pos = 0.0;
  for (const auto& p : px) n_pos += p.positive ? 1.0 : 0.0;
  const double n_neg = static_cast<double>(px.size()) - n_pos;
  RocCurve all;
  all.fpr.push_back(0.0);
  all.tpr.push_back(0.0);
  double tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < px.size();) {
    std::size_t j = i;
    while (j < px.size() && px[j].score == px[i].score) {
      (px[j].positive ? tp : fp) += 1.0;
      ++j;
    }
    all.fpr.push_back(n_neg > 0 ? fp / n_neg : 0.0);
    all.tpr.push_back(n_pos > 0 ? tp / n_pos : 0.0);
    i = j;
  }
  if (all.fpr.size() <= max_points || max_points < 2) return all;
  RocCurve out;
  const std::size_t n = all.fpr.size();
  for (std::size_t k = 0; k < max_points; ++k) {
    const std::size_t idx = k * (n - 1) / (max_points - 1);
    out.fpr.push_back(all.fpr[idx]);
    out.tpr.push_back(all.tpr[idx]);
  }
  return out;
}

}  // namespace lightsplice::metrics
