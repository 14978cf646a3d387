#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "lightsplice/error.hpp"

namespace lightsplice {

struct RgbTag {};
struct MaskTag {};
struct ScoreTag {};

// Row-major, channel-interleaved grid of doubles. The tag keeps images,
// masks and detector scores from being mixed up at compile time while
// sharing every generic operation (blur, resize, ...).
template <int Channels, class Tag>
class Raster {
 public:
  static constexpr int kChannels = Channels;
  using tag_type = Tag;

  Raster() = default;
  Raster(int height, int width, double fill = 0.0)
      : height_(height), width_(width) {
    if (height <= 0 || width <= 0) {
      throw DimensionError("raster dimensions must be positive, got " +
                           std::to_string(height) + "x" + std::to_string(width));
    }
    if constexpr (std::is_same_v<Tag, RgbTag>) {
      if (height < 8 || width < 8) {
        throw DimensionError("images must be at least 8x8, got " + std::to_string(height) +
                             "x" + std::to_string(width));
      }
    }
    data_.assign(static_cast<std::size_t>(height) * width * Channels, fill);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int y, int x, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * Channels + c];
  }
  double at(int y, int x, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * Channels + c];
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool same_shape(int h, int w) const { return h == height_ && w == width_; }
  template <class Other>
  bool same_shape(const Other& o) const {
    return o.height() == height_ && o.width() == width_;
  }

  void clamp01() {
    for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
  }

  friend bool operator==(const Raster& a, const Raster& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ && a.data_ == b.data_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

using ImageRGB = Raster<3, RgbTag>;
using SoftMask = Raster<1, MaskTag>;
using ScoreMap = Raster<1, ScoreTag>;
// A BinaryMask is a SoftMask whose values are exactly 0 or 1; see is_binary().
using BinaryMask = SoftMask;

// Reinterpret a single-channel raster under another tag (e.g. treat a score
// map as a soft mask). Values are copied unchanged.
template <class ToTag, class FromTag>
Raster<1, ToTag> retag(const Raster<1, FromTag>& src) {
  Raster<1, ToTag> out(src.height(), src.width());
  std::copy(src.values().begin(), src.values().end(), out.values().begin());
  return out;
}

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

inline double luma(double r, double g, double b) { return kLumaR * r + kLumaG * g + kLumaB * b; }

// BT.601 luma plane of an image.
template <class OutTag = MaskTag>
Raster<1, OutTag> luma_plane(const ImageRGB& img) {
  Raster<1, OutTag> out(img.height(), img.width());
  auto src = img.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = luma(src[3 * i], src[3 * i + 1], src[3 * i + 2]);
  }
  return out;
}

inline bool is_binary(const SoftMask& m) {
  return std::all_of(m.values().begin(), m.values().end(),
                     [](double v) { return v == 0.0 || v == 1.0; });
}

// Binarize at 0.5: the convention used for ground truth everywhere a hard
// label is needed (metrics, ring statistics).
inline BinaryMask binarize(const SoftMask& m, double at = 0.5) {
  BinaryMask out(m.height(), m.width());
  auto s = m.values();
  auto d = out.values();
  for (std::size_t i = 0; i < s.size(); ++i) d[i] = s[i] >= at ? 1.0 : 0.0;
  return out;
}

inline double mean_value(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace lightsplice
