#include "lightsplice/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "lightsplice/corpus.hpp"
#include "lightsplice/error.hpp"
#include "lightsplice/filters.hpp"
#include "lightsplice/image_io.hpp"
#include "lightsplice/log.hpp"
#include "lightsplice/metrics.hpp"
#include "lightsplice/random.hpp"

namespace lightsplice::model {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

fs::path resolve_path(const std::string& p, const fs::path& base) {
  fs::path path(p);
  if (path.empty() || path.is_absolute() || base.empty()) return path;
  return base / path;
}

template <class R>
R flipped(const R& src) {
  R out(src.height(), src.width());
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      for (int c = 0; c < R::kChannels; ++c) out.at(y, src.width() - 1 - x, c) = src.at(y, x, c);
    }
  }
  return out;
}

struct Adam {
  ParamSet m, v;
  long step = 0;

  explicit Adam(const ParamSet& shape) : m(zeros_like(shape)), v(zeros_like(shape)) {}

  void update(ParamSet& params, const ParamSet& g, const TrainStageConfig& c) {
    ++step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
    for (std::size_t t = 0; t < params.size(); ++t) {
      auto& p = params[t].values;
      auto& mt = m[t].values;
      auto& vt = v[t].values;
      const auto& gt = g[t].values;
      for (std::size_t i = 0; i < p.size(); ++i) {
        mt[i] = c.beta1 * mt[i] + (1.0 - c.beta1) * gt[i];
        vt[i] = c.beta2 * vt[i] + (1.0 - c.beta2) * gt[i] * gt[i];
        p[i] -= c.learning_rate * (mt[i] / bc1) / (std::sqrt(vt[i] / bc2) + c.epsilon);
      }
    }
  }
};

fs::path save_last_good(const SegModelParams& params, const TrainStageConfig& stage) {
  const fs::path dir = stage.checkpoint_dir.empty() ? fs::temp_directory_path() : stage.checkpoint_dir;
  const fs::path path = dir / ("stage_" + stage.name + ".last_good.ckpt");
  save_checkpoint(params, path);
  return path;
}

}  // namespace

void TrainStageConfig::validate() const {
  if (name.empty()) throw ConfigError("stage name must not be empty");
  if (epochs < 1) throw ConfigError("stage '" + name + "': epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("stage '" + name + "': batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("stage '" + name + "': learning_rate must be > 0");
  if (methods.empty() && !include_composites) {
    throw ConfigError("stage '" + name + "': no input methods configured");
  }
  if (!(real_fraction >= 0.0 && real_fraction <= 1.0)) {
    throw ConfigError("stage '" + name + "': real_fraction must lie in [0,1]");
  }
}

nlohmann::json TrainStageConfig::to_json() const {
  return {{"name", name},
          {"manifest", manifest.string()},
          {"methods", methods},
          {"include_composites", include_composites},
          {"real_fraction", real_fraction},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"beta1", beta1},
          {"beta2", beta2},
          {"epsilon", epsilon},
          {"seed", seed},
          {"augment_flips", augment_flips},
          {"max_samples", max_samples},
          {"dice_weight", loss.dice_weight},
          {"val_manifest", val_manifest.string()},
          {"val_method", val_method},
          {"val_max_samples", val_max_samples},
          {"checkpoint_dir", checkpoint_dir.string()}};
}

TrainStageConfig TrainStageConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  TrainStageConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "name") c.name = v.get<std::string>();
      else if (key == "manifest") c.manifest = resolve_path(v.get<std::string>(), base_dir);
      else if (key == "methods") c.methods = v.get<std::vector<std::string>>();
      else if (key == "include_composites") c.include_composites = v.get<bool>();
      else if (key == "real_fraction") c.real_fraction = v.get<double>();
      else if (key == "epochs") c.epochs = v.get<int>();
      else if (key == "batch_size") c.batch_size = v.get<int>();
      else if (key == "learning_rate") c.learning_rate = v.get<double>();
      else if (key == "beta1") c.beta1 = v.get<double>();
      else if (key == "beta2") c.beta2 = v.get<double>();
      else if (key == "epsilon") c.epsilon = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "augment_flips") c.augment_flips = v.get<bool>();
      else if (key == "max_samples") c.max_samples = v.get<int>();
      else if (key == "dice_weight") c.loss.dice_weight = v.get<double>();
      else if (key == "val_manifest") c.val_manifest = resolve_path(v.get<std::string>(), base_dir);
      else if (key == "val_method") c.val_method = v.get<std::string>();
      else if (key == "val_max_samples") c.val_max_samples = v.get<int>();
      else if (key == "checkpoint_dir") c.checkpoint_dir = resolve_path(v.get<std::string>(), base_dir);
      else throw ConfigError("unknown stage config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed stage config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json TrainReport::to_json() const {
  nlohmann::json ep = nlohmann::json::array();
  for (const auto& e : epochs) {
    ep.push_back({{"epoch", e.epoch},
                  {"mean_loss", e.mean_loss},
                  {"val_auc", e.val_auc ? nlohmann::json(*e.val_auc) : nlohmann::json(nullptr)},
                  {"wall_seconds", e.wall_seconds}});
  }
  return {{"stage", stage}, {"examples", examples}, {"epochs", ep}, {"checkpoint", checkpoint.string()}};
}

std::string TrainReport::loss_trace_csv() const {
  std::ostringstream out;
  out << "stage,epoch,mean_loss,val_auc\n";
  for (const auto& e : epochs) {
    out << stage << ',' << e.epoch << ',' << fmt_double(e.mean_loss) << ','
        << (e.val_auc ? fmt_double(*e.val_auc) : std::string()) << '\n';
  }
  return out.str();
}

std::vector<LabeledExample> load_examples(const corpus::DatasetManifest& manifest,
                                          const std::vector<std::string>& methods, bool include_composites,
                                          int side, int max_samples, double real_fraction) {
  if (!(real_fraction >= 0.0 && real_fraction <= 1.0)) throw ConfigError("real_fraction must lie in [0,1]");
  std::vector<LabeledExample> out;
  std::size_t count = manifest.samples.size();
  if (max_samples > 0) count = std::min(count, static_cast<std::size_t>(max_samples));
  for (std::size_t i = 0; i < count; ++i) {
    const auto& e = manifest.samples[i];
    const SoftMask mask = corpus::resize(load_mask(manifest.resolve(e.mask)), side);
    auto add = [&](const std::string& tag, const std::string& path) {
      out.push_back({e.id + "/" + tag, Example{corpus::resize(load_image(manifest.resolve(path)), side), mask}});
    };
    if (include_composites) add("composite", e.composite);
    for (const auto& m : methods) {
      auto it = e.harmonized.find(m);
      if (it == e.harmonized.end()) {
        throw ConfigError("sample '" + e.id + "' has no harmonized image for method '" + m + "'");
      }
      add(m, it->second);
    }
    const bool with_real = std::floor(static_cast<double>(i + 1) * real_fraction) >
                           std::floor(static_cast<double>(i) * real_fraction);
    if (with_real) {
      if (e.real.empty()) throw ConfigError("sample '" + e.id + "' has no unedited image");
      out.push_back({e.id + "/real", Example{corpus::resize(load_image(manifest.resolve(e.real)), side),
                                             SoftMask(side, side, 0.0)}});
    }
  }
  return out;
}

std::optional<double> mean_auc(const SegModelParams& params, const std::vector<LabeledExample>& examples) {
  double sum = 0.0;
  int n = 0;
  for (const auto& ex : examples) {
    const auto auc = metrics::roc_auc(forward(params, ex.example.image), binarize(ex.example.target));
    if (auc.value) {
      sum += *auc.value;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

StageResult train_on_examples(SegModelParams params, const std::vector<LabeledExample>& train,
                              const TrainStageConfig& stage, const std::vector<LabeledExample>& val) {
  stage.validate();
  if (train.empty()) throw ConfigError("stage '" + stage.name + "': no training examples");
  StageResult result;
  result.report.stage = stage.name;
  result.report.examples = train.size();

  Adam adam(params.tensors);
  std::vector<std::size_t> order(train.size());
  for (int epoch = 1; epoch <= stage.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(stage.seed, static_cast<std::uint64_t>(epoch)));
    shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(stage.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(stage.batch_size));
      std::vector<Example> batch;
      for (std::size_t k = start; k < end; ++k) {
        const Example& ex = train[order[k]].example;
        if (stage.augment_flips && rng.coin()) {
          batch.push_back({flipped(ex.image), flipped(ex.target)});
        } else {
          batch.push_back(ex);
        }
      }
      GradientResult g;
      try {
        g = grad(params, batch, stage.loss);
      } catch (const TrainingError& e) {
        const fs::path last = save_last_good(params, stage);
        throw TrainingError(std::string(e.what()) + " at stage '" + stage.name + "', epoch " +
                                std::to_string(epoch) + ", step " + std::to_string(batches + 1),
                            last.string());
      }
      SegModelParams previous = params;
      adam.update(params.tensors, g.gradients, stage);
      if (!params.all_finite()) {
        const fs::path last = save_last_good(previous, stage);
        throw TrainingError("parameters became non-finite at stage '" + stage.name + "'", last.string());
      }
      result.report.step_losses.push_back(g.loss);
      loss_sum += g.loss;
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / batches;
    if (!val.empty()) rec.val_auc = mean_auc(params, val);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream msg;
    msg << "stage " << stage.name << " epoch " << epoch << "/" << stage.epochs << " loss " << rec.mean_loss;
    if (rec.val_auc) msg << " val_auc " << *rec.val_auc;
    msg << " (" << rec.wall_seconds << " s)";
    log_info(msg.str());
    result.report.epochs.push_back(rec);
  }
  params.provenance.push_back(stage.name);
  if (!stage.checkpoint_dir.empty()) {
    result.report.checkpoint = stage.checkpoint_dir / ("stage_" + stage.name + ".ckpt");
    save_checkpoint(params, result.report.checkpoint);
  }
  result.params = std::move(params);
  return result;
}

StageResult train_stage(SegModelParams params, const TrainStageConfig& stage) {
  stage.validate();
  if (stage.manifest.empty()) throw ConfigError("stage '" + stage.name + "': no manifest configured");
  const auto manifest = corpus::read_manifest(stage.manifest);
  if (manifest.samples.empty()) throw ConfigError("stage '" + stage.name + "': manifest is empty");
  const int side = params.config.input_side;
  const auto train =
      load_examples(manifest, stage.methods, stage.include_composites, side, stage.max_samples, stage.real_fraction);
  std::vector<LabeledExample> val;
  if (!stage.val_manifest.empty()) {
    val = load_examples(corpus::read_manifest(stage.val_manifest), {stage.val_method}, false, side,
                        stage.val_max_samples);
  }
  return train_on_examples(std::move(params), train, stage, val);
}

void PipelineConfig::validate() const {
  model.validate();
  if (stages.empty()) throw ConfigError("pipeline: no stages configured");
  for (const auto& s : stages) {
    s.validate();
    if (s.manifest.empty()) throw ConfigError("pipeline: stage '" + s.name + "' has no manifest");
  }
  if (!stop_after.empty() &&
      std::none_of(stages.begin(), stages.end(), [&](const auto& s) { return s.name == stop_after; })) {
    throw ConfigError("pipeline: stop_after names unknown stage '" + stop_after + "'");
  }
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json st = nlohmann::json::array();
  for (const auto& s : stages) st.push_back(s.to_json());
  return {{"profile", profile}, {"model", model.to_json()}, {"stages", st}, {"stop_after", stop_after},
          {"out_dir", out_dir.string()}};
}

PipelineConfig PipelineConfig::preset(const std::string& profile) {
  PipelineConfig c;
  c.profile = profile;
  int epochs_a = 0, epochs_bc = 0;
  if (profile == "desk-scale") {
    c.model = SegNetConfig{64, 3, 8, 0};
    epochs_a = 10;
    epochs_bc = 5;
  } else if (profile == "paper-scale") {
    c.model = SegNetConfig{512, 4, 16, 0};
    epochs_a = 100;
    epochs_bc = 50;
  } else {
    throw ConfigError("unknown profile '" + profile + "' (expected desk-scale or paper-scale)");
  }
  TrainStageConfig a;
  a.name = "A";
  a.methods = {"filter_chain"};
  a.real_fraction = 0.5;
  a.epochs = epochs_a;
  TrainStageConfig b = a;
  b.name = "B";
  b.methods = {"physics"};
  b.epochs = epochs_bc;
  b.seed = 1;
  TrainStageConfig cc = b;
  cc.name = "C";
  cc.methods = {"recipe"};
  cc.seed = 2;
  c.stages = {a, b, cc};
  return c;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  const std::string profile = j.value("profile", "desk-scale");
  PipelineConfig c = preset(profile);
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "profile") continue;
      if (key == "model") {
        nlohmann::json merged = c.model.to_json();
        for (const auto& [mk, mv] : v.items()) merged[mk] = mv;
        c.model = SegNetConfig::from_json(merged);
      } else if (key == "stages") {
        std::vector<TrainStageConfig> stages;
        for (const auto& sj : v) {
          // Stage entries override the profile's stage of the same name.
          const std::string name = sj.value("name", "");
          nlohmann::json merged = nlohmann::json::object();
          for (const auto& d : c.stages) {
            if (d.name == name) merged = d.to_json();
          }
          for (const auto& [sk, sv] : sj.items()) merged[sk] = sv;
          stages.push_back(TrainStageConfig::from_json(merged, base_dir));
        }
        c.stages = std::move(stages);
      } else if (key == "stop_after") {
        c.stop_after = v.get<std::string>();
      } else if (key == "out_dir") {
        c.out_dir = resolve_path(v.get<std::string>(), base_dir);
      } else {
        throw ConfigError("unknown pipeline config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed pipeline config: ") + e.what());
  }
  return c;
}

PipelineResult train_pipeline(const PipelineConfig& config) {
  config.validate();
  for (const auto& s : config.stages) {
    const fs::path file = fs::is_directory(s.manifest) ? s.manifest / "manifest.json" : s.manifest;
    if (!fs::exists(file)) {
      throw ConfigError("pipeline: manifest for stage '" + s.name + "' not found: " + file.string());
    }
  }
  PipelineResult result;
  result.params = init_model(config.model);
  for (const auto& s : config.stages) {
    TrainStageConfig stage = s;
    if (stage.checkpoint_dir.empty() && !config.out_dir.empty()) stage.checkpoint_dir = config.out_dir;
    log_info("pipeline: starting stage " + stage.name);
    StageResult r = train_stage(std::move(result.params), stage);
    result.params = std::move(r.params);
    result.checkpoints.push_back(r.report.checkpoint);
    result.reports.push_back(std::move(r.report));
    if (!config.stop_after.empty() && s.name == config.stop_after) break;
  }
  return result;
}

}  // namespace lightsplice::model
