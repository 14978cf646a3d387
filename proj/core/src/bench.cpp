#include "lightsplice/bench.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "lightsplice/error.hpp"
#include "lightsplice/image_io.hpp"
#include "lightsplice/log.hpp"
#include "lightsplice/random.hpp"

namespace lightsplice::bench {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool same_double(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "nan") return kNaN;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw DecodeError("grid csv: bad number '" + s + "'");
  return v;
}

int parse_int(const std::string& s) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DecodeError("grid csv: bad integer '" + s + "'");
  }
}

// ---- loaded suite --------------------------------------------------------

struct SuiteImages {
  std::vector<std::string> ids;
  std::vector<BinaryMask> gts;
  // row -> per-sample image (nullopt when the sample lacks that row)
  std::map<std::string, std::vector<std::optional<ImageRGB>>> images;
};

SuiteImages load_suite(const corpus::DatasetManifest& suite, const std::vector<std::string>& rows) {
  SuiteImages out;
  for (const auto& row : rows) out.images[row];
  for (const auto& e : suite.samples) {
    auto s = corpus::load_sample(suite, e, true);
    out.ids.push_back(e.id);
    out.gts.push_back(binarize(s.mask));
    for (const auto& row : rows) {
      auto& col = out.images[row];
      if (row == kCompositeRow) {
        col.emplace_back(std::move(s.composite));
      } else if (auto it = s.harmonized.find(row); it != s.harmonized.end()) {
        col.emplace_back(std::move(it->second));
      } else {
        col.emplace_back(std::nullopt);
      }
    }
  }
  return out;
}

double metric_value(const std::string& metric, const ScoreMap& s, const BinaryMask& gt, double t,
                    std::string* skip_reason) {
  if (metric == "auc") {
    auto v = metrics::roc_auc(s, gt);
    if (v.skipped()) {
      *skip_reason = v.skip_reason;
      return kNaN;
    }
    return *v.value;
  }
  return metrics::miou(metrics::threshold(s, t), gt);
}

double mean_or_nan(const std::string& name, std::vector<metrics::MetricValue> values) {
  try {
    return metrics::aggregate(name, std::move(values)).mean;
  } catch (const NoValidImagesError&) {
    return kNaN;
  }
}

double pooled_miou(const std::vector<const ScoreMap*>& scores, const std::vector<const BinaryMask*>& gts,
                   double t) {
  if (scores.empty()) return kNaN;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto s = scores[i]->values();
    const auto g = gts[i]->values();
    for (std::size_t k = 0; k < s.size(); ++k) {
      const bool p = s[k] >= t;
      const bool y = g[k] >= 0.5;
      tp += p && y;
      fp += p && !y;
      fn += !p && y;
      tn += !p && !y;
    }
  }
  const auto iou = [](std::size_t inter, std::size_t uni) {
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  };
  return 0.5 * (iou(tp, tp + fp + fn) + iou(tn, tn + fp + fn));
}

struct ColumnResult {
  std::map<std::string, GridCell> cells;  // by row
  std::map<std::string, metrics::RocCurve> roc;
};

ColumnResult score_column(Detector& det, const SuiteImages& suite, const std::vector<std::string>& rows,
                          const BenchConfig& cfg) {
  ColumnResult out;
  const std::size_t n = suite.ids.size();
  for (const auto& row : rows) {
    GridCell cell;
    cell.images = static_cast<int>(n);
    std::vector<std::optional<ScoreMap>> maps(n);
    std::vector<bool> declined(n, false), failed(n, false);
    const auto& imgs = suite.images.at(row);
    for (std::size_t i = 0; i < n; ++i) {
      if (!imgs[i]) {
        failed[i] = true;
        cell.errors.push_back(suite.ids[i] + ": no '" + row + "' image in suite");
        continue;
      }
      try {
        maps[i] = det.score({*imgs[i], suite.ids[i], row, &suite.gts[i]});
      } catch (const std::exception& e) {
        failed[i] = true;
        cell.errors.push_back(suite.ids[i] + ": " + e.what());
        continue;
      }
      if (!maps[i]) {
        declined[i] = true;
        continue;
      }
      const auto& s = *maps[i];
      const bool in_range = std::all_of(s.values().begin(), s.values().end(),
                                        [](double v) { return v >= 0.0 && v <= 1.0; });
      if (!s.same_shape(*imgs[i]) || !in_range) {
        failed[i] = true;
        cell.errors.push_back(suite.ids[i] + ": score map has the wrong shape or leaves [0,1]");
        maps[i].reset();
        continue;
      }
      ++cell.detections;
    }

    for (const auto& metric : cfg.metrics) {
      CellMetric cm;
      std::vector<metrics::MetricValue> skip_acc, zero_acc;
      for (std::size_t i = 0; i < n; ++i) {
        if (failed[i]) {
          cm.per_image.push_back(kNaN);
          skip_acc.push_back(metrics::MetricValue::skip("error"));
          zero_acc.push_back(metrics::MetricValue::skip("error"));
          continue;
        }
        if (declined[i]) {
          ++cm.declined;
          cm.per_image.push_back(kNaN);
          skip_acc.push_back(metrics::MetricValue::skip(metrics::kDeclined));
          std::string reason;
          const ScoreMap zeros(suite.gts[i].height(), suite.gts[i].width(), 0.0);
          const double z = metric_value(metric, zeros, suite.gts[i], cfg.threshold, &reason);
          zero_acc.push_back(std::isnan(z) ? metrics::MetricValue::skip(reason) : metrics::MetricValue::of(z));
          continue;
        }
        std::string reason;
        const double v = metric_value(metric, *maps[i], suite.gts[i], cfg.threshold, &reason);
        cm.per_image.push_back(v);
        const auto mv = std::isnan(v) ? metrics::MetricValue::skip(reason) : metrics::MetricValue::of(v);
        skip_acc.push_back(mv);
        zero_acc.push_back(mv);
      }
      for (const auto& v : skip_acc) (v.skipped() ? cm.skipped : cm.valid) += 1;

      if (cfg.pooling == Pooling::kGlobal) {
        std::vector<const ScoreMap*> sp;
        std::vector<const BinaryMask*> gp;
        std::vector<ScoreMap> sv;
        std::vector<BinaryMask> gv;
        for (std::size_t i = 0; i < n; ++i) {
          if (!maps[i]) continue;
          sp.push_back(&*maps[i]);
          gp.push_back(&suite.gts[i]);
        }
        if (metric == "auc") {
          for (std::size_t i = 0; i < sp.size(); ++i) {
            sv.push_back(*sp[i]);
            gv.push_back(*gp[i]);
          }
          const auto v = sv.empty() ? metrics::MetricValue::skip(metrics::kDeclined)
                                    : metrics::roc_auc_pooled(sv, gv);
          cm.mean = v.value.value_or(kNaN);
        } else {
          cm.mean = pooled_miou(sp, gp, cfg.threshold);
        }
        cm.mean_declined_as_zero = cm.mean;
      } else {
        cm.mean = mean_or_nan(metric, skip_acc);
        cm.mean_declined_as_zero = mean_or_nan(metric, zero_acc);
      }
      cell.metrics[metric] = std::move(cm);
    }

    if (cfg.collect_roc) {
      std::vector<ScoreMap> sv;
      std::vector<BinaryMask> gv;
      for (std::size_t i = 0; i < n; ++i) {
        if (!maps[i]) continue;
        sv.push_back(*maps[i]);
        gv.push_back(suite.gts[i]);
      }
      if (!sv.empty()) {
        try {
          out.roc[row] = metrics::roc_curve(sv, gv);
        } catch (const Error& e) {
          cell.errors.push_back(std::string("roc: ") + e.what());
        }
      }
    }
    out.cells[row] = std::move(cell);
  }
  return out;
}

// ---- csv -------------------------------------------------------------------

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::vector<std::string>> csv_records(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> rec;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      rec.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        rec.push_back(std::move(field));
        out.push_back(std::move(rec));
      }
      rec.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw DecodeError("grid csv: unterminated quote");
  if (any || !field.empty()) {
    rec.push_back(std::move(field));
    out.push_back(std::move(rec));
  }
  return out;
}

const std::vector<std::string> kCsvHeader{"row",      "detector", "metric",  "mean",
                                          "mean_declined_as_zero", "valid", "skipped",
                                          "declined", "images",   "detections", "per_image",
                                          "errors"};

std::string render_csv(const BenchmarkGrid& g) {
  std::string out;
  for (std::size_t i = 0; i < kCsvHeader.size(); ++i) out += (i ? "," : "") + kCsvHeader[i];
  out += '\n';
  for (const auto& row : g.rows) {
    for (const auto& det : g.detectors) {
      const auto& cell = g.at(row, det);
      const std::string errors = cell.errors.empty() ? "" : nlohmann::json(cell.errors).dump();
      auto line = [&](const std::string& metric, const CellMetric* m) {
        std::string per;
        if (m) {
          for (std::size_t i = 0; i < m->per_image.size(); ++i) per += (i ? ";" : "") + fmt17(m->per_image[i]);
        }
        const CellMetric blank;
        const CellMetric& v = m ? *m : blank;
        out += csv_field(row) + ',' + csv_field(det) + ',' + csv_field(metric) + ',' + fmt17(v.mean) + ',' +
               fmt17(v.mean_declined_as_zero) + ',' + std::to_string(v.valid) + ',' + std::to_string(v.skipped) +
               ',' + std::to_string(v.declined) + ',' + std::to_string(cell.images) + ',' +
               std::to_string(cell.detections) + ',' + csv_field(per) + ',' + csv_field(errors) + '\n';
      };
      bool wrote = false;
      for (const auto& metric : g.metrics) {
        if (auto it = cell.metrics.find(metric); it != cell.metrics.end()) {
          line(metric, &it->second);
          wrote = true;
        }
      }
      if (!wrote) line("", nullptr);
    }
  }
  return out;
}

// ---- markdown ------------------------------------------------------------

std::string metric_label(const std::string& m) {
  if (m == "auc") return "ROC AUC";
  if (m == "miou") return "mIoU";
  return m;
}

std::string fmt4(double v) {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void markdown_table(std::string& out, const BenchmarkGrid& g, const std::string& metric, bool zero_accounting) {
  out += "| " + std::string(zero_accounting ? "declined = 0" : "Method");
  for (const auto& d : g.detectors) out += " | " + d;
  out += " |\n|---";
  for (std::size_t i = 0; i < g.detectors.size(); ++i) out += "|---:";
  out += "|\n";
  for (const auto& row : g.rows) {
    std::vector<double> vals;
    for (const auto& d : g.detectors) {
      const auto& cell = g.at(row, d);
      auto it = cell.metrics.find(metric);
      vals.push_back(it == cell.metrics.end()         ? kNaN
                     : zero_accounting ? it->second.mean_declined_as_zero
                                       : it->second.mean);
    }
    double best = -std::numeric_limits<double>::infinity();
    for (double v : vals) {
      if (!std::isnan(v)) best = std::max(best, v);
    }
    out += "| " + row;
    for (std::size_t j = 0; j < g.detectors.size(); ++j) {
      const auto& cell = g.at(row, g.detectors[j]);
      std::string text = fmt4(vals[j]);
      if (!std::isnan(vals[j]) && fmt4(vals[j]) == fmt4(best)) text = "**" + text + "**";
      if (!zero_accounting && cell.images > 0 && cell.detections < cell.images) {
        text += " (" + std::to_string(cell.detections) + ")";
      }
      out += " | " + text;
    }
    out += " |\n";
  }
}

std::string render_markdown(const BenchmarkGrid& g) {
  std::string out;
  bool partial = false, any_declined = false;
  for (const auto& [key, cell] : g.cells) {
    partial |= cell.images > 0 && cell.detections < cell.images;
    for (const auto& [name, m] : cell.metrics) any_declined |= m.declined > 0;
  }
  for (const auto& metric : g.metrics) {
    out += "### " + metric_label(metric) + "\n\n";
    markdown_table(out, g, metric, false);
    out += '\n';
    if (any_declined) {
      out += "Declined inputs scored as an all-zero map:\n\n";
      markdown_table(out, g, metric, true);
      out += '\n';
    }
  }
  if (partial) out += "Numbers in parentheses count the inputs with a detection; the others are skipped.\n\n";
  std::string errs;
  for (const auto& row : g.rows) {
    for (const auto& d : g.detectors) {
      for (const auto& e : g.at(row, d).errors) errs += "- " + row + " / " + d + ": " + e + "\n";
    }
  }
  if (!errs.empty()) out += "### Errors\n\n" + errs + "\n";
  return out;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
  return out;
}

}  // namespace

// ---- grid ------------------------------------------------------------------

CellMetric::CellMetric() : mean(kNaN), mean_declined_as_zero(kNaN) {}

bool operator==(const CellMetric& a, const CellMetric& b) {
  if (!same_double(a.mean, b.mean) || !same_double(a.mean_declined_as_zero, b.mean_declined_as_zero)) return false;
  if (a.valid != b.valid || a.skipped != b.skipped || a.declined != b.declined) return false;
  if (a.per_image.size() != b.per_image.size()) return false;
  for (std::size_t i = 0; i < a.per_image.size(); ++i) {
    if (!same_double(a.per_image[i], b.per_image[i])) return false;
  }
  return true;
}

bool operator==(const BenchmarkGrid& a, const BenchmarkGrid& b) {
  return a.rows == b.rows && a.detectors == b.detectors && a.metrics == b.metrics && a.cells == b.cells;
}

const GridCell& BenchmarkGrid::at(const std::string& row, const std::string& detector) const {
  auto it = cells.find({row, detector});
  if (it == cells.end()) throw LookupError("grid has no cell (" + row + ", " + detector + ")");
  return it->second;
}

GridCell& BenchmarkGrid::at(const std::string& row, const std::string& detector) {
  return cells[{row, detector}];
}

void BenchmarkGrid::check_complete() const {
  for (const auto& d : detectors) {
    if (d.empty()) throw ArgumentError("grid has a detector with an empty name");
  }
  for (const auto& r : rows) {
    if (r.empty()) throw ArgumentError("grid has a row with an empty name");
  }
  for (const auto& r : rows) {
    for (const auto& d : detectors) {
      if (!cells.count({r, d})) throw ArgumentError("grid is missing cell (" + r + ", " + d + ")");
    }
  }
}

std::string suite_hash(const corpus::DatasetManifest& suite) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(corpus::dump_manifest(suite))));
  return buf;
}

BenchmarkGrid run_benchmark(const std::vector<Detector*>& detectors, const corpus::DatasetManifest& suite,
                            const BenchConfig& config) {
  if (suite.samples.empty()) throw ConfigError("benchmark suite is empty");
  if (detectors.empty()) throw ConfigError("no detectors to benchmark");
  if (!(config.threshold >= 0.0 && config.threshold <= 1.0)) throw ArgumentError("threshold must lie in [0,1]");
  if (config.metrics.empty()) throw ConfigError("no metrics requested");
  for (const auto& m : config.metrics) {
    if (m != "auc" && m != "miou") throw ArgumentError("unknown metric '" + m + "' (expected auc or miou)");
  }
  std::set<std::string> names;
  for (auto* d : detectors) {
    if (d->name().empty()) throw ConfigError("detector with an empty name");
    if (!names.insert(d->name()).second) throw ConfigError("duplicate detector '" + d->name() + "'");
  }

  BenchmarkGrid grid;
  grid.rows = config.rows;
  if (grid.rows.empty()) {
    grid.rows.push_back(kCompositeRow);
    for (const auto& m : suite.methods()) grid.rows.push_back(m);
  }
  grid.metrics = config.metrics;
  for (auto* d : detectors) grid.detectors.push_back(d->name());

  const auto images = load_suite(suite, grid.rows);
  log_info("benchmark: " + std::to_string(images.ids.size()) + " samples x " + std::to_string(grid.rows.size()) +
           " rows x " + std::to_string(detectors.size()) + " detectors");

  std::vector<ColumnResult> columns(detectors.size());
  std::vector<std::size_t> parallel, serial;
  for (std::size_t j = 0; j < detectors.size(); ++j) {
    (detectors[j]->stateful() || config.threads <= 1 ? serial : parallel).push_back(j);
  }
  for (std::size_t start = 0; start < parallel.size(); start += static_cast<std::size_t>(config.threads)) {
    std::vector<std::thread> pool;
    const auto end = std::min(parallel.size(), start + static_cast<std::size_t>(config.threads));
    for (std::size_t k = start; k < end; ++k) {
      const auto j = parallel[k];
      pool.emplace_back([&, j] { columns[j] = score_column(*detectors[j], images, grid.rows, config); });
    }
    for (auto& t : pool) t.join();
  }
  for (auto j : serial) columns[j] = score_column(*detectors[j], images, grid.rows, config);

  for (std::size_t j = 0; j < detectors.size(); ++j) {
    for (auto& [row, cell] : columns[j].cells) grid.cells[{row, grid.detectors[j]}] = std::move(cell);
    for (auto& [row, curve] : columns[j].roc) grid.roc[{row, grid.detectors[j]}] = std::move(curve);
  }

  grid.metadata["suite_hash"] = suite_hash(suite);
  grid.metadata["samples"] = suite.samples.size();
  grid.metadata["metrics"] = config.metrics;
  grid.metadata["threshold"] = config.threshold;
  grid.metadata["pooling"] = config.pooling == Pooling::kGlobal ? "global" : "per-image";
  return grid;
}

// ---- gt check ------------------------------------------------------------

nlohmann::json GtCheckReport::to_json() const {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& im : images) {
    per.push_back({{"id", im.id}, {"declined", im.declined}, {"fp_fraction", im.fp_fraction},
                   {"max_score", im.max_score}});
  }
  return {{"detector", detector},
          {"threshold", threshold},
          {"mean_fp_fraction", mean_fp_fraction},
          {"mean_max_score", mean_max_score},
          {"declined", declined},
          {"images", per}};
}

GtCheckReport gt_check(Detector& detector, const corpus::DatasetManifest& suite, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ArgumentError("threshold must lie in [0,1]");
  GtCheckReport rep;
  rep.detector = detector.name();
  rep.threshold = threshold;
  double fp_sum = 0.0, max_sum = 0.0;
  int scored = 0;
  const std::string row = "real";
  for (const auto& e : suite.samples) {
    if (e.real.empty()) continue;
    const ImageRGB img = load_image(suite.resolve(e.real));
    const BinaryMask empty(img.height(), img.width(), 0.0);
    GtImage gi;
    gi.id = e.id;
    auto s = detector.score({img, e.id, row, &empty});
    if (!s) {
      gi.declined = true;
      ++rep.declined;
    } else {
      gi.fp_fraction = mean_value(metrics::threshold(*s, threshold).values());
      gi.max_score = *std::max_element(s->values().begin(), s->values().end());
      fp_sum += gi.fp_fraction;
      max_sum += gi.max_score;
      ++scored;
    }
    rep.images.push_back(std::move(gi));
  }
  if (rep.images.empty()) throw ConfigError("suite has no real (unedited) images for the ground-truth check");
  rep.mean_fp_fraction = scored ? fp_sum / scored : kNaN;
  rep.mean_max_score = scored ? max_sum / scored : kNaN;
  return rep;
}

// ---- ablation ------------------------------------------------------------

AblationReport ablation(const std::vector<model::SegModelParams>& variants, const corpus::DatasetManifest& suite,
                        const BenchConfig& config) {
  if (variants.empty()) throw ConfigError("ablation needs at least one checkpoint");
  AblationReport rep;
  for (std::size_t k = 0; k < variants.size(); ++k) {
    const auto& prov = variants[k].provenance;
    if (prov.empty()) throw ConfigError("ablation checkpoint " + std::to_string(k) + " has no stage provenance");
    if (k > 0) {
      const auto& prev = variants[k - 1].provenance;
      if (prov.size() < prev.size() || !std::equal(prev.begin(), prev.end(), prov.begin())) {
        throw ConfigError("ablation checkpoint " + std::to_string(k) +
                          " does not extend the previous checkpoint's stage provenance");
      }
    }
    std::string label;
    for (const auto& s : prov) label += (label.empty() ? "" : "+") + s;
    rep.variants.push_back(label);
  }
  BenchConfig cfg = config;
  if (std::find(cfg.metrics.begin(), cfg.metrics.end(), "auc") == cfg.metrics.end()) cfg.metrics.push_back("auc");
  if (std::find(cfg.metrics.begin(), cfg.metrics.end(), "miou") == cfg.metrics.end()) cfg.metrics.push_back("miou");
  for (std::size_t k = 0; k < variants.size(); ++k) {
    ModelDetector det(variants[k], "segnet");
    rep.grids.push_back(run_benchmark({&det}, suite, cfg));
  }
  const auto& base = rep.grids.front();
  for (std::size_t k = 0; k < variants.size(); ++k) {
    const auto& g = rep.grids[k];
    for (const auto& row : g.rows) {
      const auto& c = g.at(row, "segnet");
      const auto& b = base.at(row, "segnet");
      AblationReport::Row r{rep.variants[k], row, c.metrics.at("auc").mean, c.metrics.at("miou").mean, 0.0, 0.0};
      r.delta_auc = r.auc - b.metrics.at("auc").mean;
      r.delta_miou = r.miou - b.metrics.at("miou").mean;
      rep.rows.push_back(r);
    }
  }
  return rep;
}

std::string AblationReport::to_markdown() const {
  std::string out = "| Variant | Method | ROC AUC | mIoU | dAUC | dmIoU |\n|---|---|---:|---:|---:|---:|\n";
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "| %s | %s | %s | %s | %+.4f | %+.4f |\n", r.variant.c_str(), r.method.c_str(),
                  fmt4(r.auc).c_str(), fmt4(r.miou).c_str(), r.delta_auc, r.delta_miou);
    out += buf;
  }
  return out;
}

std::string AblationReport::to_csv() const {
  std::string out = "variant,method,auc,miou,delta_auc,delta_miou\n";
  for (const auto& r : rows) {
    out += csv_field(r.variant) + ',' + csv_field(r.method) + ',' + fmt17(r.auc) + ',' + fmt17(r.miou) + ',' +
           fmt17(r.delta_auc) + ',' + fmt17(r.delta_miou) + '\n';
  }
  return out;
}

// ---- render ------------------------------------------------------------

std::string render(const BenchmarkGrid& grid, const std::string& format) {
  if (format != "csv" && format != "markdown" && format != "md") {
    throw ArgumentError("unknown render format '" + format + "' (expected csv or markdown)");
  }
  grid.check_complete();
  return format == "csv" ? render_csv(grid) : render_markdown(grid);
}

BenchmarkGrid parse_csv(const std::string& text) {
  const auto recs = csv_records(text);
  if (recs.empty() || recs.front() != kCsvHeader) throw DecodeError("grid csv: missing or unexpected header");
  BenchmarkGrid g;
  for (std::size_t i = 1; i < recs.size(); ++i) {
    const auto& f = recs[i];
    if (f.size() != kCsvHeader.size()) {
      throw DecodeError("grid csv: line " + std::to_string(i + 1) + " has " + std::to_string(f.size()) + " fields");
    }
    const auto& row = f[0];
    const auto& det = f[1];
    const auto& metric = f[2];
    if (std::find(g.rows.begin(), g.rows.end(), row) == g.rows.end()) g.rows.push_back(row);
    if (std::find(g.detectors.begin(), g.detectors.end(), det) == g.detectors.end()) g.detectors.push_back(det);
    auto& cell = g.at(row, det);
    cell.images = parse_int(f[8]);
    cell.detections = parse_int(f[9]);
    cell.errors = f[11].empty() ? std::vector<std::string>{} : nlohmann::json::parse(f[11]).get<std::vector<std::string>>();
    if (metric.empty()) continue;
    if (std::find(g.metrics.begin(), g.metrics.end(), metric) == g.metrics.end()) g.metrics.push_back(metric);
    CellMetric m;
    m.mean = parse_double(f[3]);
    m.mean_declined_as_zero = parse_double(f[4]);
    m.valid = parse_int(f[5]);
    m.skipped = parse_int(f[6]);
    m.declined = parse_int(f[7]);
    if (!f[10].empty()) {
      std::stringstream ss(f[10]);
      std::string tok;
      while (std::getline(ss, tok, ';')) m.per_image.push_back(parse_double(tok));
    }
    cell.metrics[metric] = std::move(m);
  }
  return g;
}

// ---- roc plot ------------------------------------------------------------

void plot_roc(const metrics::RocCurve& curve, const std::filesystem::path& path, int side) {
  if (side < 32) throw ArgumentError("roc plot side must be at least 32");
  if (curve.fpr.size() != curve.tpr.size() || curve.fpr.empty()) throw ArgumentError("roc curve is empty");
  ImageRGB img(side, side, 1.0);
  const int m = side / 10;
  const int span = side - 2 * m - 1;
  auto put = [&](int x, int y, double r, double g, double b) {
    if (x < 0 || y < 0 || x >= side || y >= side) return;
    img.at(y, x, 0) = r;
    img.at(y, x, 1) = g;
    img.at(y, x, 2) = b;
  };
  auto to_px = [&](double fx, double fy) {
    return std::pair<int, int>{m + static_cast<int>(std::lround(fx * span)),
                               side - 1 - m - static_cast<int>(std::lround(fy * span))};
  };
  auto line = [&](double x0, double y0, double x1, double y1, double r, double g, double b, bool dashed) {
    auto [ax, ay] = to_px(x0, y0);
    auto [bx, by] = to_px(x1, y1);
    const int steps = std::max({std::abs(bx - ax), std::abs(by - ay), 1});
    for (int s = 0; s <= steps; ++s) {
      if (dashed && (s / 4) % 2) continue;
      const double t = static_cast<double>(s) / steps;
      put(static_cast<int>(std::lround(ax + t * (bx - ax))), static_cast<int>(std::lround(ay + t * (by - ay))), r, g, b);
    }
  };
  line(0, 0, 1, 0, 0, 0, 0, false);
  line(0, 0, 0, 1, 0, 0, 0, false);
  line(1, 0, 1, 1, 0.8, 0.8, 0.8, false);
  line(0, 1, 1, 1, 0.8, 0.8, 0.8, false);
  line(0, 0, 1, 1, 0.6, 0.6, 0.6, true);
  for (std::size_t i = 1; i < curve.fpr.size(); ++i) {
    line(curve.fpr[i - 1], curve.tpr[i - 1], curve.fpr[i], curve.tpr[i], 0.1, 0.3, 0.85, false);
  }
  save_png(path, img);
}

void write_grid_outputs(const BenchmarkGrid& grid, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot write '" + p.string() + "'");
    f << text;
  };
  write(dir / "grid.csv", render(grid, "csv"));
  write(dir / "grid.md", render(grid, "markdown"));
  for (const auto& [key, curve] : grid.roc) {
    plot_roc(curve, dir / "roc" / (sanitize(key.first) + "_" + sanitize(key.second) + ".png"));
  }
}

}  // namespace lightsplice::bench
