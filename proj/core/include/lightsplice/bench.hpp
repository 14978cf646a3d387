#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lightsplice/detectors.hpp"
#include "lightsplice/manifest.hpp"
#include "lightsplice/metrics.hpp"
#include "lightsplice/model.hpp"

namespace lightsplice::bench {

inline constexpr const char* kCompositeRow = "composite";

// Aggregate of one metric over one cell. NaN marks "no value" (a cell
// where every image was skipped, or a per-image skip).
struct CellMetric {
  double mean;
  // Declined inputs scored as an all-zero map instead of being skipped.
  double mean_declined_as_zero;
  int valid = 0;
  int skipped = 0;  // includes declined
  int declined = 0;
  std::vector<double> per_image;

  CellMetric();
  // NaN-aware, bit-exact comparison.
  friend bool operator==(const CellMetric& a, const CellMetric& b);
};

struct GridCell {
  std::map<std::string, CellMetric> metrics;
  int images = 0;
  int detections = 0;
  std::vector<std::string> errors;

  friend bool operator==(const GridCell&, const GridCell&) = default;
};

using CellKey = std::pair<std::string, std::string>;  // (row, detector)

struct BenchmarkGrid {
  std::vector<std::string> rows;      // harmonization methods, in display order
  std::vector<std::string> detectors;  // columns, in display order
  std::vector<std::string> metrics;    // "auc", "miou"
  std::map<CellKey, GridCell> cells;
  // Not serialized to CSV and ignored by ==.
  nlohmann::json metadata = nlohmann::json::object();
  std::map<CellKey, metrics::RocCurve> roc;

  const GridCell& at(const std::string& row, const std::string& detector) const;
  GridCell& at(const std::string& row, const std::string& detector);
  // Throws ArgumentError naming the first missing cell or empty label.
  void check_complete() const;

  friend bool operator==(const BenchmarkGrid& a, const BenchmarkGrid& b);
};

enum class Pooling { kPerImage, kGlobal };

struct BenchConfig {
  std::vector<std::string> metrics{"auc", "miou"};
  double threshold = 0.5;
  Pooling pooling = Pooling::kPerImage;
  // Empty = composite plus every method in the suite.
  std::vector<std::string> rows;
  bool collect_roc = false;
  int threads = 1;
};

// 16 hex digits of FNV-1a over the serialized manifest.
std::string suite_hash(const corpus::DatasetManifest& suite);

BenchmarkGrid run_benchmark(const std::vector<Detector*>& detectors,
                            const corpus::DatasetManifest& suite, const BenchConfig& config = {});

struct GtImage {
  std::string id;
  double fp_fraction = 0.0;
  double max_score = 0.0;
  bool declined = false;
};

struct GtCheckReport {
  std::string detector;
  double threshold = 0.5;
  std::vector<GtImage> images;
  double mean_fp_fraction = 0.0;  // over non-declined images
  double mean_max_score = 0.0;
  int declined = 0;

  nlohmann::json to_json() const;
};

GtCheckReport gt_check(Detector& detector, const corpus::DatasetManifest& suite, double threshold = 0.5);

struct AblationReport {
  std::vector<std::string> variants;  // "A", "A+B", ...
  std::vector<BenchmarkGrid> grids;
  // One row per (variant, method): mean AUC / mIoU and their deltas against
  // the first variant.
  struct Row {
    std::string variant;
    std::string method;
    double auc;
    double miou;
    double delta_auc;
    double delta_miou;
  };
  std::vector<Row> rows;

  std::string to_markdown() const;
  std::string to_csv() const;
};

// Variants must form a provenance chain: every checkpoint's stage list
// extends (or equals) the previous one's. Anything else is a ConfigError.
AblationReport ablation(const std::vector<model::SegModelParams>& variants,
                        const corpus::DatasetManifest& suite, const BenchConfig& config = {});

// format: "csv" or "markdown" ("md").
std::string render(const BenchmarkGrid& grid, const std::string& format);
BenchmarkGrid parse_csv(const std::string& text);

void plot_roc(const metrics::RocCurve& curve, const std::filesystem::path& path, int side = 256);

// grid.csv, grid.md and, when curves were collected, roc/<row>_<detector>.png.
void write_grid_outputs(const BenchmarkGrid& grid, const std::filesystem::path& dir);

}  // namespace lightsplice::bench
