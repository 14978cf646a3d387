#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "lightsplice/error.hpp"
#include "lightsplice/raster.hpp"

namespace lightsplice {

// Normalized 1-D Gaussian taps, radius ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw ArgumentError("gaussian sigma must be positive");
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable convolution with replicate padding, applied per channel.
template <int C, class Tag>
Raster<C, Tag> convolve_separable(const Raster<C, Tag>& src, const std::vector<double>& taps) {
  const int h = src.height();
  const int w = src.width();
  const int r = static_cast<int>(taps.size() / 2);
  Raster<C, Tag> tmp(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k) {
          acc += taps[k + r] * src.at(y, std::clamp(x + k, 0, w - 1), c);
        }
        tmp.at(y, x, c) = acc;
      }
    }
  }
  Raster<C, Tag> out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k) {
          acc += taps[k + r] * tmp.at(std::clamp(y + k, 0, h - 1), x, c);
        }
        out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

template <int C, class Tag>
Raster<C, Tag> gaussian_blur(const Raster<C, Tag>& src, double sigma) {
  return convolve_separable(src, gaussian_kernel(sigma));
}

// Mean over a (2r+1)^2 window, replicate padding.
template <int C, class Tag>
Raster<C, Tag> box_blur(const Raster<C, Tag>& src, int radius) {
  std::vector<double> taps(2 * radius + 1, 1.0 / (2 * radius + 1));
  return convolve_separable(src, taps);
}

// Bilinear resampling with half-pixel centers and edge clamping. Resizing to
// the same shape reproduces the input exactly.
template <int C, class Tag>
Raster<C, Tag> resize_bilinear(const Raster<C, Tag>& src, int out_h, int out_w) {
  Raster<C, Tag> out(out_h, out_w);
  const double sy = static_cast<double>(src.height()) / out_h;
  const double sx = static_cast<double>(src.width()) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < C; ++c) {
        const double top = src.at(y0, x0, c) + wx * (src.at(y0, x1, c) - src.at(y0, x0, c));
        const double bot = src.at(y1, x0, c) + wx * (src.at(y1, x1, c) - src.at(y1, x0, c));
        out.at(y, x, c) = top + wy * (bot - top);
      }
    }
  }
  return out;
}

// Square (Chebyshev) dilation of a binary plane.
template <class Tag>
Raster<1, Tag> dilate(const Raster<1, Tag>& src, int radius) {
  const int h = src.height();
  const int w = src.width();
  Raster<1, Tag> tmp(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double m = 0.0;
      for (int k = std::max(0, x - radius); k <= std::min(w - 1, x + radius); ++k) {
        m = std::max(m, src.at(y, k));
      }
      tmp.at(y, x) = m;
    }
  }
  Raster<1, Tag> out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double m = 0.0;
      for (int k = std::max(0, y - radius); k <= std::min(h - 1, y + radius); ++k) {
        m = std::max(m, tmp.at(k, x));
      }
      out.at(y, x) = m;
    }
  }
  return out;
}

// out = src + t * (target - src), exact at t == 0 and t == 1 and whenever
// target == src.
inline double blend_value(double src, double target, double t) {
  if (t <= 0.0) return src;
  if (t >= 1.0) return target;
  return src + t * (target - src);
}

}  // namespace lightsplice
