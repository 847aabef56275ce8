// Copyright 2026 The akd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "akd/checkpoint.hpp"
#include "akd/data.hpp"
#include "akd/distill.hpp"
#include "akd/encoder.hpp"
#include "akd/heads.hpp"
#include "akd/metrics.hpp"
#include "akd/optim.hpp"
#include "akd/params.hpp"

namespace akd {

/// Synthetic-data knobs plus sequence counts for the generation command.
struct GeneratorSettings {
  int dim = 16;
  int t_min = 20;
  int t_max = 60;
  float class_balance = 0.5f;
  float noise_scale = 1.0f;
  float shift_scale = 1.0f;
  float distractor_prob = 0.9f;
  std::uint64_t profile_seed = 7;
  int n_train = 2000;
  int n_val = 0;  // 0: training carves a 90/10 split out of train by id hash
  int n_test = 600;
  int n_aux = 600;

  /// Builds the generator config: class profiles from profile_seed, frame
  /// sampling from `sample_seed`.
  GeneratorConfig make_config(std::uint64_t sample_seed) const;
};

/// One training (or pretraining) run, parsed from strict JSON: unknown keys
/// anywhere raise ConfigError naming the key.
struct RunConfig {
  std::string pipeline = "baseline";  // baseline | teacher_adapters |
                                      // conventional_kd | adaptive_kd |
                                      // pretrain_teacher
  std::uint64_t seed = 1;
  int epochs = 30;
  int batch_size = 32;
  int splice_context = 3;
  int adapter_depth = 1;
  std::string ed_target = "frames";  // frames | summary

  struct Student {
    std::string preset = "desk-student";
    float lr = 1e-3f;
  } student;

  struct Teacher {
    std::string preset = "desk-teacher";
    float lr = 1e-3f;
    std::string checkpoint;     // pretrained teacher checkpoint path
    std::string adapters_from;  // optional adapter warm-start checkpoint
    bool ce = true;             // adaptive: keep training the teacher adapters
  } teacher;

  PlateauConfig scheduler;
  DistillWeights weights;

  struct DataPaths {
    std::string train;
    std::string val;  // empty: split off train by id hash
    std::string test;
  } data;

  GeneratorSettings generator;
  std::string resume_from;

  void validate() const;
};

RunConfig run_config_from_json(const std::string& text, const std::string& context);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& config);

/// Artifacts of a training run. Checkpoints embed the config snapshot, all
/// parameters (teacher included for distillation runs), optimizer moments,
/// scheduler state, and the data-order RNG, so a run can resume bitwise.
struct RunResult {
  std::string checkpoint_last;  // <out_dir>/last.ckpt
  std::string checkpoint_best;  // <out_dir>/best.ckpt
  std::string metrics_path;     // <out_dir>/metrics.csv
  std::string metrics_csv;      // full CSV text
  int epochs_run = 0;
  float final_val_total = 0.0f;
  float best_val_total = 0.0f;
};

/// Teacher-encoder pretraining on the auxiliary frame-tagging task. The aux
/// sequences are generated in-process from config.generator with substream
/// (seed, "aux-data"); epochs = config.epochs (0 leaves the encoder at its
/// random initialization — a valid degenerate teacher). The saved checkpoint
/// holds only the frozen encoder parameters; the tagging head is discarded.
RunResult pretrain_teacher_encoder(const RunConfig& config, const std::string& out_dir);

/// Cross-entropy training of the student encoder and adapters from scratch.
RunResult train_baseline(const RunConfig& config, const std::string& out_dir);

/// Cross-entropy training of teacher adapters over a frozen pretrained
/// encoder (config.teacher.checkpoint). Produces a full teacher checkpoint.
RunResult train_teacher_adapters(const RunConfig& config, const std::string& out_dir);

/// Knowledge distillation from a fixed, fully trained teacher
/// (config.teacher.checkpoint from train_teacher_adapters).
RunResult distill_conventional(const RunConfig& config, const std::string& out_dir);

/// Adaptive distillation: per batch the teacher adapters take one
/// cross-entropy step first (unless teacher.ce is off), then the student
/// distills against the refreshed targets. The teacher encoder stays frozen
/// and is hash-checked every epoch.
RunResult distill_adaptive(const RunConfig& config, const std::string& out_dir);

/// Dispatch on config.pipeline.
RunResult run_pipeline(const RunConfig& config, const std::string& out_dir);

/// A scoring model rebuilt from a checkpoint ("student" or "teacher" side;
/// empty `which` picks whichever is present, student first).
struct LoadedModel {
  std::unique_ptr<ParamStore> store;
  std::unique_ptr<Encoder> encoder;
  std::unique_ptr<AdapterBank> heads;
  EncoderConfig encoder_config;
  std::string which;  // "student" | "teacher"
  int splice_context = 3;
};

LoadedModel load_model(const std::string& checkpoint_path, const std::string& which = "");

/// Detection scores (device-directed probability) per invocation type.
std::array<ScoredSet, kInvocationCount> score_dataset(const LoadedModel& model,
                                                      const Dataset& dataset, int batch_size);

struct EvalResult {
  struct PerInvocation {
    std::string invocation;
    double eer = 0.0;
    double threshold = 0.0;
    int count = 0;
    std::string det_path;
  };
  std::array<PerInvocation, kInvocationCount> per_invocation;  // HAG, AG, FCO
};

/// Scores `data_path` with the checkpointed model and writes one DET curve
/// CSV per invocation type into out_dir.
EvalResult evaluate_checkpoint(const std::string& checkpoint_path, const std::string& data_path,
                               const std::string& out_dir, const std::string& which = "");

/// 90/10 deterministic split by FNV-1a hash of the example id (hash % 10
/// == 9 lands in validation). Independent of dataset order.
std::pair<Dataset, Dataset> split_train_val(const Dataset& dataset);

}  // namespace akd
