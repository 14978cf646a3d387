#pragma once

// Brute-force reference implementations used only by the tests. They share
// no code with the library beyond the raster container.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "lightsplice/raster.hpp"

namespace oracle {

// Fraction of (positive, negative) pixel pairs ranked correctly, ties 1/2.
inline double pairwise_auc(const lightsplice::ScoreMap& s, const lightsplice::BinaryMask& gt) {
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < s.values().size(); ++i) {
    (gt.values()[i] >= 0.5 ? pos : neg).push_back(s.values()[i]);
  }
  double hits = 0.0;
  for (double p : pos) {
    for (double n : neg) hits += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  }
  return hits / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

inline double pixel_count_miou(const lightsplice::BinaryMask& pred, const lightsplice::BinaryMask& gt) {
  double iou[2];
  for (int cls = 0; cls < 2; ++cls) {
    long inter = 0, uni = 0;
    for (int y = 0; y < gt.height(); ++y) {
      for (int x = 0; x < gt.width(); ++x) {
        const bool p = (pred.at(y, x) >= 0.5) == (cls == 1);
        const bool g = (gt.at(y, x) >= 0.5) == (cls == 1);
        inter += p && g;
        uni += p || g;
      }
    }
    iou[cls] = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  }
  return (iou[0] + iou[1]) / 2.0;
}

// Windowed SSIM written directly from the definition: explicit 11x11
// Gaussian weights, every statistic accumulated in a double loop.
inline double windowed_ssim(const lightsplice::ImageRGB& a, const lightsplice::ImageRGB& b) {
  auto gray = [](const lightsplice::ImageRGB& im, int y, int x) {
    return 0.299 * im.at(y, x, 0) + 0.587 * im.at(y, x, 1) + 0.114 * im.at(y, x, 2);
  };
  constexpr int k = 11;
  double w[k][k];
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const double dy = i - 5, dx = j - 5;
      w[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
      total += w[i][j];
    }
  }
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double sum = 0.0;
  int windows = 0;
  for (int y0 = 0; y0 + k <= a.height(); ++y0) {
    for (int x0 = 0; x0 + k <= a.width(); ++x0) {
      double ma = 0, mb = 0;
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
          ma += w[i][j] / total * gray(a, y0 + i, x0 + j);
          mb += w[i][j] / total * gray(b, y0 + i, x0 + j);
        }
      }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
          const double da = gray(a, y0 + i, x0 + j) - ma;
          const double db = gray(b, y0 + i, x0 + j) - mb;
          va += w[i][j] / total * da * da;
          vb += w[i][j] / total * db * db;
          cov += w[i][j] / total * da * db;
        }
      }
      sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++windows;
    }
  }
  return sum / windows;
}

// Direct 2D Gaussian blur with replicate padding, radius ceil(3 sigma).
template <int C, class Tag>
lightsplice::Raster<C, Tag> blur_2d(const lightsplice::Raster<C, Tag>& src, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> g(2 * r + 1);
  double norm = 0.0;
  for (int i = -r; i <= r; ++i) norm += g[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  lightsplice::Raster<C, Tag> out(src.height(), src.width());
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            const int yy = std::clamp(y + dy, 0, src.height() - 1);
            const int xx = std::clamp(x + dx, 0, src.width() - 1);
            acc += g[dy + r] * g[dx + r] / (norm * norm) * src.at(yy, xx, c);
          }
        }
        out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

}  // namespace oracle
