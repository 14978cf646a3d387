// lightsplice: generate data, train the staged detector, evaluate, report.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lightsplice/bench.hpp"
#include "lightsplice/dataset.hpp"
#include "lightsplice/error.hpp"
#include "lightsplice/log.hpp"
#include "lightsplice/manifest.hpp"
#include "lightsplice/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lightsplice;

namespace {

// Bad invocation (missing flag, refusing to overwrite); reported as usage.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write '" + p.string() + "'");
  f << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot read '" + p.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) {
  try {
    return json::parse(read_text(p));
  } catch (const json::exception& e) {
    throw ConfigError("'" + p.string() + "' is not valid JSON: " + e.what());
  }
}

// An output directory: refuses a non-empty one unless forced, in which case
// it is cleared so the result does not mix with an older run.
void prepare_out_dir(const fs::path& dir, bool force, const std::string& flag) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw UsageError(flag + ": '" + dir.string() + "' exists and is not empty (use --force)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

// runs/<timestamp>/ unless --out names the directory.
fs::path run_dir(const std::string& out, const std::string& runs_root, bool force) {
  fs::path dir = out;
  if (dir.empty()) {
    dir = fs::path(runs_root) / timestamp();
    for (int k = 1; fs::exists(dir); ++k) dir = fs::path(runs_root) / (timestamp() + "-" + std::to_string(k));
  }
  prepare_out_dir(dir, force, "--out");
  return dir;
}

// Every option's final value, for the config echo.
json echo_options(const CLI::App& sub) {
  json j = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->get_expected_min() == 0) {
      j[name] = opt->count() > 0;
    } else if (opt->count() > 0) {
      j[name] = opt->as<std::string>();
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

// A JSON file of {"flag-name": value} pairs becomes command-line tokens placed
// before the user's own, so explicit flags win (last value is taken).
std::vector<std::string> config_tokens(const CLI::App& sub, const fs::path& file) {
  const json j = read_json(file);
  if (!j.is_object()) throw ConfigError("'" + file.string() + "' must hold a JSON object");
  std::vector<std::string> out;
  for (const auto& [key, v] : j.items()) {
    const CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config" || key == "help") {
      throw ConfigError("unknown key '" + key + "' in '" + file.string() + "' for " + sub.get_name());
    }
    if (opt->get_expected_min() == 0) {
      if (!v.is_boolean()) throw ConfigError("key '" + key + "' must be true or false");
      if (v.get<bool>()) out.push_back("--" + key);
      continue;
    }
    std::string value;
    if (v.is_string()) {
      value = v.get<std::string>();
    } else if (v.is_array()) {
      for (const auto& e : v) value += (value.empty() ? "" : ",") + (e.is_string() ? e.get<std::string>() : e.dump());
    } else {
      value = v.dump();
    }
    out.push_back("--" + key);
    out.push_back(value);
  }
  return out;
}

std::unique_ptr<CLI::App> build_app() {
  auto app = std::make_unique<CLI::App>("Lighting-harmonization forensics: synthesize, train, evaluate", "lightsplice");
  app->require_subcommand(1);
  app->option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app->add_flag("-v,--verbose", "Debug logging");
  app->add_flag("-q,--quiet", "Only errors");
  return app;
}

struct GenArgs {
  std::string out, families = "all", mode = "fit", split = "train", shape = "random", texture = "random";
  int n = 100, size = 64, distractors = 1;
  std::uint64_t seed = 0;
  double feather = 1.0;
  bool force = false;
};

int cmd_gen(const CLI::App& sub, const GenArgs& a) {
  harmonize::DatasetSpec spec;
  spec.out = a.out;
  spec.n = a.n;
  spec.seed = a.seed;
  spec.split = a.split;
  spec.gen.height = spec.gen.width = a.size;
  spec.gen.feather_radius = a.feather;
  spec.gen.max_distractors = a.distractors;
  spec.gen.shape = corpus::parse_shape_family(a.shape);
  spec.gen.texture = corpus::parse_texture_family(a.texture);
  spec.mode = harmonize::parse_mode(a.mode);
  if (a.families != "all") {
    spec.families.clear();
    for (const auto& f : split_list(a.families)) spec.families.push_back(harmonize::parse_method(f));
  }
  prepare_out_dir(a.out, a.force, "--out");
  const auto m = harmonize::generate_dataset(spec);
  write_text(fs::path(a.out) / "config.json", json{{"command", "gen-data"}, {"options", echo_options(sub)}}.dump(2) + "\n");
  std::cout << "wrote " << m.samples.size() << " samples to " << a.out << '\n';
  return 0;
}

struct SuiteArgs {
  std::string sources, out;
  int n = 25;
  std::uint64_t seed = 0;
  bool force = false;
};

int cmd_suite(const CLI::App& sub, const SuiteArgs& a) {
  std::vector<corpus::DatasetManifest> sources;
  for (const auto& s : split_list(a.sources)) sources.push_back(corpus::read_manifest(s));
  if (sources.empty()) throw UsageError("--sources: no dataset given");
  auto suite = corpus::build_test_suite(sources, a.n, a.seed);
  prepare_out_dir(a.out, a.force, "--out");
  suite.root = fs::absolute(a.out);
  suite.split = "test";
  corpus::write_manifest(suite);
  write_text(fs::path(a.out) / "config.json", json{{"command", "suite"}, {"options", echo_options(sub)}}.dump(2) + "\n");
  std::cout << "suite of " << suite.samples.size() << " samples, hash " << bench::suite_hash(suite) << '\n';
  return 0;
}

struct TrainArgs {
  std::string config, profile, data, val, out, runs = "runs", stop_after;
  int seed = -1;
  bool force = false;
};

int cmd_train(const CLI::App& sub, const TrainArgs& a) {
  model::PipelineConfig cfg;
  if (!a.config.empty()) {
    json j = read_json(a.config);
    if (!a.profile.empty()) j["profile"] = a.profile;
    cfg = model::PipelineConfig::from_json(j, fs::path(a.config).parent_path());
  } else {
    cfg = model::PipelineConfig::preset(a.profile.empty() ? "desk-scale" : a.profile);
  }
  for (auto& s : cfg.stages) {
    if (s.manifest.empty()) s.manifest = a.data;
    if (s.val_manifest.empty()) s.val_manifest = a.val;
  }
  for (const auto& s : cfg.stages) {
    if (s.manifest.empty()) throw UsageError("--data: stage " + s.name + " has no training manifest");
  }
  if (!a.stop_after.empty()) cfg.stop_after = a.stop_after;
  if (a.seed >= 0) cfg.model.seed = static_cast<std::uint64_t>(a.seed);
  const fs::path dir = run_dir(a.out.empty() ? cfg.out_dir.string() : a.out, a.runs, a.force);
  cfg.out_dir = dir;
  cfg.validate();

  json echo{{"command", "train"}, {"options", echo_options(sub)}, {"pipeline", cfg.to_json()}, {"started", timestamp()}};
  write_text(dir / "config.json", echo.dump(2) + "\n");

  const auto result = model::train_pipeline(cfg);
  json reports = json::array();
  for (const auto& r : result.reports) {
    write_text(dir / ("loss_" + r.stage + ".csv"), r.loss_trace_csv());
    reports.push_back(r.to_json());
  }
  write_text(dir / "train_report.json", reports.dump(2) + "\n");
  model::save_checkpoint(result.params, dir / "model.ckpt");
  std::cout << "trained stages";
  for (const auto& s : result.params.provenance) std::cout << ' ' << s;
  std::cout << "; checkpoint " << (dir / "model.ckpt").string() << '\n';
  return 0;
}

struct EvalArgs {
  std::string suite, checkpoints, detectors = "oracle,const0.5,random,highpass", external, external_root, metrics = "auc,miou",
                                  pooling = "per-image", out, runs = "runs";
  double threshold = 0.5;
  std::uint64_t seed = 0;
  int threads = 1;
  bool roc = false, force = false;
};

std::vector<std::unique_ptr<bench::Detector>> make_detectors(const EvalArgs& a) {
  std::vector<std::unique_ptr<bench::Detector>> dets;
  for (const auto& name : split_list(a.detectors)) dets.push_back(bench::make_builtin_detector(name, a.seed));
  const auto ckpts = split_list(a.checkpoints);
  for (const auto& c : ckpts) {
    std::string name = "segnet";
    if (ckpts.size() > 1) name += "-" + fs::path(c).parent_path().filename().string() + "-" + fs::path(c).stem().string();
    dets.push_back(std::make_unique<bench::ModelDetector>(model::load_checkpoint(c), name));
  }
  const auto ext = split_list(a.external);
  if (!ext.empty() && a.external_root.empty()) throw UsageError("--external-root: required with --external");
  for (const auto& name : ext) dets.push_back(std::make_unique<bench::ExternalScoreDetector>(a.external_root, name));
  if (dets.empty()) throw UsageError("--detectors: nothing to evaluate");
  return dets;
}

bench::BenchConfig bench_config(const EvalArgs& a) {
  bench::BenchConfig cfg;
  cfg.metrics = split_list(a.metrics);
  cfg.threshold = a.threshold;
  if (a.pooling == "global") {
    cfg.pooling = bench::Pooling::kGlobal;
  } else if (a.pooling != "per-image") {
    throw UsageError("--pooling: expected per-image or global, got '" + a.pooling + "'");
  }
  cfg.collect_roc = a.roc;
  cfg.threads = a.threads;
  return cfg;
}

int cmd_eval(const CLI::App& sub, const EvalArgs& a) {
  const auto suite = corpus::read_manifest(a.suite);
  auto dets = make_detectors(a);
  const auto cfg = bench_config(a);
  const fs::path dir = run_dir(a.out, a.runs, a.force);
  const std::string hash = bench::suite_hash(suite);
  json echo{{"command", "eval"}, {"options", echo_options(sub)}, {"suite_hash", hash}, {"started", timestamp()}};
  write_text(dir / "config.json", echo.dump(2) + "\n");

  std::vector<bench::Detector*> ptrs;
  for (auto& d : dets) ptrs.push_back(d.get());
  auto grid = bench::run_benchmark(ptrs, suite, cfg);
  grid.metadata["timestamp"] = echo["started"];
  bench::write_grid_outputs(grid, dir);
  write_text(dir / "suite_hash.txt", hash + "\n");
  write_text(dir / "metadata.json", grid.metadata.dump(2) + "\n");
  std::cout << bench::render(grid, "markdown") << "run directory: " << dir.string() << '\n';
  return 0;
}

int cmd_report(const std::string& run, const std::string& format) {
  const fs::path dir = run;
  if (!fs::exists(dir / "grid.csv")) throw UsageError("--run: no grid.csv in '" + run + "'");
  const auto grid = bench::parse_csv(read_text(dir / "grid.csv"));
  const std::string md = bench::render(grid, "markdown");
  write_text(dir / "grid.md", md);
  std::cout << (format == "csv" ? bench::render(grid, "csv") : md);
  return 0;
}

struct GtArgs {
  std::string suite, checkpoint, detector, out;
  double threshold = 0.5;
  std::uint64_t seed = 0;
};

int cmd_gt(const CLI::App& sub, const GtArgs& a) {
  if (a.checkpoint.empty() == a.detector.empty()) throw UsageError("--checkpoint/--detector: give exactly one");
  const auto suite = corpus::read_manifest(a.suite);
  std::unique_ptr<bench::Detector> det;
  if (!a.checkpoint.empty()) {
    det = std::make_unique<bench::ModelDetector>(model::load_checkpoint(a.checkpoint));
  } else {
    det = bench::make_builtin_detector(a.detector, a.seed);
  }
  const auto rep = bench::gt_check(*det, suite, a.threshold);
  if (!a.out.empty()) {
    json j{{"command", "gt-check"}, {"options", echo_options(sub)}, {"report", rep.to_json()}};
    write_text(a.out, j.dump(2) + "\n");
  }
  std::printf("%s: %zu unedited images, mean FP fraction %.4f, mean max score %.4f, declined %d\n",
              rep.detector.c_str(), rep.images.size(), rep.mean_fp_fraction, rep.mean_max_score, rep.declined);
  return 0;
}

struct AblateArgs {
  std::string checkpoints, suite, out, runs = "runs";
  double threshold = 0.5;
  bool force = false;
};

int cmd_ablate(const CLI::App& sub, const AblateArgs& a) {
  std::vector<model::SegModelParams> variants;
  for (const auto& c : split_list(a.checkpoints)) variants.push_back(model::load_checkpoint(c));
  if (variants.empty()) throw UsageError("--checkpoints: no checkpoint given");
  const auto suite = corpus::read_manifest(a.suite);
  bench::BenchConfig cfg;
  cfg.threshold = a.threshold;
  const auto rep = bench::ablation(variants, suite, cfg);
  const fs::path dir = run_dir(a.out, a.runs, a.force);
  write_text(dir / "config.json",
             json{{"command", "ablate"}, {"options", echo_options(sub)}, {"suite_hash", bench::suite_hash(suite)},
                  {"started", timestamp()}}
                     .dump(2) + "\n");
  write_text(dir / "ablation.md", rep.to_markdown());
  write_text(dir / "ablation.csv", rep.to_csv());
  for (std::size_t k = 0; k < rep.grids.size(); ++k) bench::write_grid_outputs(rep.grids[k], dir / rep.variants[k]);
  std::cout << rep.to_markdown() << "run directory: " << dir.string() << '\n';
  return 0;
}

void report_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  auto app = build_app();

  GenArgs gen;
  auto* s_gen = app->add_subcommand("gen-data", "Synthesize a spliced + harmonized corpus");
  s_gen->add_option("--config", "JSON file of option values");
  s_gen->add_option("--out", gen.out, "Output dataset directory")->required();
  s_gen->add_option("--n", gen.n, "Number of composites")->check(CLI::PositiveNumber);
  s_gen->add_option("--size", gen.size, "Square image side")->check(CLI::Range(16, 4096));
  s_gen->add_option("--seed", gen.seed, "Generator seed");
  s_gen->add_option("--families", gen.families, "all, or a comma list of filter_chain,recipe,physics");
  s_gen->add_option("--feather", gen.feather, "Mask feather radius in pixels")->check(CLI::NonNegativeNumber);
  s_gen->add_option("--mode", gen.mode, "fit (match the background) or random (random edit)");
  s_gen->add_option("--split", gen.split, "train, val or test");
  s_gen->add_option("--distractors", gen.distractors, "Max unedited objects per scene")->check(CLI::NonNegativeNumber);
  s_gen->add_option("--shape", gen.shape, "random, ellipse, polygon or textured_patch");
  s_gen->add_option("--texture", gen.texture, "random, linear_gradient, perlin_noise or flat_vignette");
  s_gen->add_flag("--force", gen.force, "Replace a non-empty output directory");

  SuiteArgs suite;
  auto* s_suite = app->add_subcommand("suite", "Sample a fixed-size test suite from one or more datasets");
  s_suite->add_option("--config", "JSON file of option values");
  s_suite->add_option("--sources", suite.sources, "Comma list of dataset directories")->required();
  s_suite->add_option("--out", suite.out, "Suite directory")->required();
  s_suite->add_option("--n", suite.n, "Samples per source")->check(CLI::PositiveNumber);
  s_suite->add_option("--seed", suite.seed, "Sampling seed");
  s_suite->add_flag("--force", suite.force, "Replace a non-empty output directory");

  TrainArgs train;
  auto* s_train = app->add_subcommand("train", "Run the staged training pipeline");
  s_train->add_option("--config", train.config, "Pipeline JSON (profile, model, stages, stop_after, out_dir)");
  s_train->add_option("--profile", train.profile, "desk-scale or paper-scale");
  s_train->add_option("--data", train.data, "Dataset for stages without their own manifest");
  s_train->add_option("--val", train.val, "Validation dataset for stages without their own");
  s_train->add_option("--out", train.out, "Run directory (default runs/<timestamp>)");
  s_train->add_option("--runs", train.runs, "Parent of timestamped run directories");
  s_train->add_option("--stop-after", train.stop_after, "Last stage to run");
  s_train->add_option("--seed", train.seed, "Weight initialization seed");
  s_train->add_flag("--force", train.force, "Replace a non-empty run directory");

  EvalArgs ev;
  auto* s_eval = app->add_subcommand("eval", "Benchmark detectors over a suite");
  s_eval->add_option("--config", "JSON file of option values");
  s_eval->add_option("--suite", ev.suite, "Suite or dataset directory")->required();
  s_eval->add_option("--checkpoint", ev.checkpoints, "Comma list of model checkpoints");
  s_eval->add_option("--detectors", ev.detectors, "Built-ins: oracle,const0,const1,const0.5,random,highpass");
  s_eval->add_option("--external", ev.external, "Comma list of external detectors");
  s_eval->add_option("--external-root", ev.external_root, "Directory holding <detector>/<id>.png score maps");
  s_eval->add_option("--metrics", ev.metrics, "Comma list of auc,miou");
  s_eval->add_option("--threshold", ev.threshold, "mIoU threshold")->check(CLI::Range(0.0, 1.0));
  s_eval->add_option("--pooling", ev.pooling, "per-image or global");
  s_eval->add_option("--seed", ev.seed, "Seed of the random detector");
  s_eval->add_option("--threads", ev.threads, "Detector columns scored in parallel")->check(CLI::PositiveNumber);
  s_eval->add_flag("--roc", ev.roc, "Write roc/<method>_<detector>.png");
  s_eval->add_option("--out", ev.out, "Run directory (default runs/<timestamp>)");
  s_eval->add_option("--runs", ev.runs, "Parent of timestamped run directories");
  s_eval->add_flag("--force", ev.force, "Replace a non-empty run directory");

  std::string report_run, report_format = "markdown";
  auto* s_report = app->add_subcommand("report", "Re-render grid.md of a finished run");
  s_report->add_option("--run", report_run, "Run directory")->required();
  s_report->add_option("--format", report_format, "markdown or csv (printed to stdout)");

  GtArgs gt;
  auto* s_gt = app->add_subcommand("gt-check", "False-positive audit on unedited images");
  s_gt->add_option("--config", "JSON file of option values");
  s_gt->add_option("--suite", gt.suite, "Suite or dataset with real/ images")->required();
  s_gt->add_option("--checkpoint", gt.checkpoint, "Model checkpoint");
  s_gt->add_option("--detector", gt.detector, "Built-in detector instead of a checkpoint");
  s_gt->add_option("--threshold", gt.threshold, "Positive threshold")->check(CLI::Range(0.0, 1.0));
  s_gt->add_option("--seed", gt.seed, "Seed of the random detector");
  s_gt->add_option("--out", gt.out, "Write the JSON report here");

  AblateArgs ab;
  auto* s_ab = app->add_subcommand("ablate", "Compare stage checkpoints (A, A+B, A+B+C) on a suite");
  s_ab->add_option("--config", "JSON file of option values");
  s_ab->add_option("--checkpoints,--configs", ab.checkpoints, "Comma list of checkpoints in stage order")->required();
  s_ab->add_option("--suite", ab.suite, "Suite or dataset directory")->required();
  s_ab->add_option("--threshold", ab.threshold, "mIoU threshold")->check(CLI::Range(0.0, 1.0));
  s_ab->add_option("--out", ab.out, "Run directory (default runs/<timestamp>)");
  s_ab->add_option("--runs", ab.runs, "Parent of timestamped run directories");
  s_ab->add_flag("--force", ab.force, "Replace a non-empty run directory");

  try {
    // Expand "--config FILE" for every subcommand except train, whose
    // config is the pipeline description itself.
    std::vector<std::string> args(argv + 1, argv + argc);
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
      if (args[i] != "--config") continue;
      CLI::App* sub = nullptr;
      for (std::size_t k = 0; k < i && sub == nullptr; ++k) sub = app->get_subcommand_no_throw(args[k]);
      if (sub == nullptr || sub == s_train) continue;
      const auto tokens = config_tokens(*sub, args[i + 1]);
      const auto pos = std::find_if(args.begin(), args.end(), [&](const std::string& a) { return a == sub->get_name(); });
      args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
      args.insert(pos + 1, tokens.begin(), tokens.end());
      break;
    }
    std::reverse(args.begin(), args.end());
    try {
      app->parse(args);
    } catch (const CLI::CallForHelp&) {
      std::cout << app->help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      std::cout << app->help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      report_error("usage", e.what());
      return 2;
    }
    if (app->get_option("--verbose")->count()) log_level() = LogLevel::kDebug;
    if (app->get_option("--quiet")->count()) log_level() = LogLevel::kQuiet;

    if (s_gen->parsed()) return cmd_gen(*s_gen, gen);
    if (s_suite->parsed()) return cmd_suite(*s_suite, suite);
    if (s_train->parsed()) return cmd_train(*s_train, train);
    if (s_eval->parsed()) return cmd_eval(*s_eval, ev);
    if (s_report->parsed()) return cmd_report(report_run, report_format);
    if (s_gt->parsed()) return cmd_gt(*s_gt, gt);
    if (s_ab->parsed()) return cmd_ablate(*s_ab, ab);
    return 2;
  } catch (const UsageError& e) {
    report_error("usage", e.what());
    return 2;
  } catch (const ArgumentError& e) {
    report_error("argument", e.what());
    return 2;
  } catch (const ConfigError& e) {
    report_error("config", e.what());
    return 3;
  } catch (const IoError& e) {
    report_error("io", e.what());
    return 4;
  } catch (const DecodeError& e) {
    report_error("decode", e.what());
    return 4;
  } catch (const TrainingError& e) {
    report_error("training", std::string(e.what()) + " (last good checkpoint: " + e.last_good_checkpoint() + ")");
    return 5;
  } catch (const Error& e) {
    report_error("error", e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return 1;
  }
}
