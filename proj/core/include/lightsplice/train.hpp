#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lightsplice/manifest.hpp"
#include "lightsplice/model.hpp"

namespace lightsplice::model {

struct TrainStageConfig {
  std::string name = "A";
  std::filesystem::path manifest;
  // Harmonized families used as inputs; the target is always the mask.
  std::vector<std::string> methods{"filter_chain"};
  bool include_composites = false;
  // Share of samples whose unedited image is added with an empty target,
  // spread evenly over the manifest. Without negatives the model learns to
  // flag some region in every image.
  double real_fraction = 0.0;
  int epochs = 10;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool augment_flips = true;
  int max_samples = 0;  // 0 = all
  LossConfig loss;
  std::filesystem::path val_manifest;  // optional
  std::string val_method = "filter_chain";
  int val_max_samples = 0;
  std::filesystem::path checkpoint_dir;  // empty = no checkpoint

  void validate() const;
  nlohmann::json to_json() const;
  // Unknown keys are rejected; relative paths resolve against base_dir.
  static TrainStageConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
  std::optional<double> val_auc;
  double wall_seconds = 0.0;
};

struct TrainReport {
  std::string stage;
  std::size_t examples = 0;
  std::vector<EpochRecord> epochs;
  std::vector<double> step_losses;
  std::filesystem::path checkpoint;

  nlohmann::json to_json() const;
  // epoch,mean_loss,val_auc with full precision; no timing, so identical
  // runs produce identical bytes.
  std::string loss_trace_csv() const;
};

struct LabeledExample {
  std::string id;
  Example example;
};

// Inputs: one example per (sample, method) plus the composite when asked and,
// for a `real_fraction` share of samples, the unedited image with an empty
// target. Images and masks are resized to `side`.
std::vector<LabeledExample> load_examples(const corpus::DatasetManifest& manifest,
                                          const std::vector<std::string>& methods,
                                          bool include_composites, int side, int max_samples = 0,
                                          double real_fraction = 0.0);

struct StageResult {
  SegModelParams params;
  TrainReport report;
};

// Adam over shuffled mini-batches. Appends the stage name to provenance and
// writes <checkpoint_dir>/stage_<name>.ckpt when a directory is configured.
StageResult train_on_examples(SegModelParams params, const std::vector<LabeledExample>& train,
                              const TrainStageConfig& stage,
                              const std::vector<LabeledExample>& val = {});

StageResult train_stage(SegModelParams params, const TrainStageConfig& stage);

// Mean per-image AUC of the model over the examples (undefined AUCs skipped).
std::optional<double> mean_auc(const SegModelParams& params, const std::vector<LabeledExample>& examples);

struct PipelineConfig {
  std::string profile = "desk-scale";
  SegNetConfig model;
  std::vector<TrainStageConfig> stages;  // run in order; default A, B, C
  std::string stop_after;                // empty = run every stage
  std::filesystem::path out_dir;

  void validate() const;
  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  // "desk-scale": side 64, depth 3, 8 base channels, 10/5/5 epochs.
  // "paper-scale": side 512, depth 4, 16 base channels, 100/50/50 epochs.
  static PipelineConfig preset(const std::string& profile);
};

struct PipelineResult {
  SegModelParams params;
  std::vector<TrainReport> reports;
  std::vector<std::filesystem::path> checkpoints;  // one per completed stage
};

// Sequential fine-tuning: every stage starts from the previous stage's
// weights. Stage manifests are checked before any training starts.
PipelineResult train_pipeline(const PipelineConfig& config);

}  // namespace lightsplice::model
