#include "lightsplice/image_io.hpp"

#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "lightsplice/error.hpp"

namespace lightsplice {
namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

cv::Mat read_or_throw(const std::filesystem::path& path, int flags) {
  if (!std::filesystem::exists(path)) {
    throw DecodeError("cannot decode '" + path.string() + "': file does not exist");
  }
  cv::Mat m;
  try {
    m = cv::imread(path.string(), flags);
  } catch (const cv::Exception& e) {
    throw DecodeError("cannot decode '" + path.string() + "': " + e.what());
  }
  if (m.empty()) throw DecodeError("cannot decode '" + path.string() + "': unreadable or corrupt");
  if (m.depth() != CV_8U) {
    cv::Mat tmp;
    m.convertTo(tmp, CV_8U, m.depth() == CV_16U ? 1.0 / 257.0 : 1.0);
    m = tmp;
  }
  return m;
}

template <class Tag>
Raster<1, Tag> load_plane(const std::filesystem::path& path) {
  const cv::Mat m = read_or_throw(path, cv::IMREAD_GRAYSCALE);
  Raster<1, Tag> out(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < m.cols; ++x) out.at(y, x) = row[x] / 255.0;
  }
  return out;
}

template <class Tag>
void save_plane(const std::filesystem::path& path, const Raster<1, Tag>& plane) {
  cv::Mat m(plane.height(), plane.width(), CV_8UC1);
  for (int y = 0; y < m.rows; ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < m.cols; ++x) row[x] = to_byte(plane.at(y, x));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) throw IoError("cannot write '" + path.string() + "'");
}

}  // namespace

ImageRGB load_image(const std::filesystem::path& path) {
  const cv::Mat m = read_or_throw(path, cv::IMREAD_COLOR);
  if (m.rows < 8 || m.cols < 8) {
    throw DecodeError("cannot decode '" + path.string() + "': image smaller than 8x8");
  }
  ImageRGB out(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < m.cols; ++x) {
      // OpenCV decodes to BGR.
      out.at(y, x, 0) = row[x][2] / 255.0;
      out.at(y, x, 1) = row[x][1] / 255.0;
      out.at(y, x, 2) = row[x][0] / 255.0;
    }
  }
  return out;
}

SoftMask load_mask(const std::filesystem::path& path) { return load_plane<MaskTag>(path); }

ScoreMap load_score_png(const std::filesystem::path& path) { return load_plane<ScoreTag>(path); }

void save_png(const std::filesystem::path& path, const ImageRGB& img) {
  cv::Mat m(img.height(), img.width(), CV_8UC3);
  for (int y = 0; y < m.rows; ++y) {
    auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < m.cols; ++x) {
      row[x] = cv::Vec3b(to_byte(img.at(y, x, 2)), to_byte(img.at(y, x, 1)), to_byte(img.at(y, x, 0)));
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) throw IoError("cannot write '" + path.string() + "'");
}

void save_png(const std::filesystem::path& path, const SoftMask& mask) { save_plane(path, mask); }

void save_png(const std::filesystem::path& path, const ScoreMap& scores) { save_plane(path, scores); }

ImageRGB quantize8(const ImageRGB& img) {
  ImageRGB out = img;
  for (double& v : out.values()) v = to_byte(v) / 255.0;
  return out;
}

SoftMask quantize8(const SoftMask& mask) {
  SoftMask out = mask;
  for (double& v : out.values()) v = to_byte(v) / 255.0;
  return out;
}

}  // namespace lightsplice
