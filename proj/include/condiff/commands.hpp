// Copyright (c) 2026 The condiff Authors. All Rights Reserved.
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

#ifndef CONDIFF_COMMANDS_HPP
#define CONDIFF_COMMANDS_HPP

#include "condiff/checkpoint.hpp"
#include "condiff/config.hpp"
#include "condiff/profiling.hpp"
#include "condiff/training.hpp"

#include <string>

namespace condiff::commands {

// Train/val datasets resolved from the config (synthetic generation or a
// dataset file).
data::Dataset resolve_train_dataset(const RunConfig& cfg);
data::Dataset resolve_val_dataset(const RunConfig& cfg);

struct TrainArtifacts {
  std::string checkpoint_path;
  std::string config_path;
  std::string log_path;
  training::FitResult fit;
};

// Full `train` command: config snapshot, run log, periodic + final
// checkpoints under cfg.out_dir. Deterministic per seed.
TrainArtifacts run_train(const RunConfig& cfg);

// Lower-level variant used by `ablate`: trains into `dir` with an explicit
// dataset, returning the live state.
training::TrainState train_to_dir(const RunConfig& cfg, const data::Dataset& train_set,
                                  const std::string& dir, TrainArtifacts* artifacts = nullptr);

struct EvalReport {
  int cases = 0;
  int best_of = 1;
  // case-averaged foreground means (primary reporting mode)
  double dice_case_mean = 0;
  double miou_case_mean = 0;
  // pooled-count alternatives
  double dice_pooled = 0;
  double miou_pooled = 0;
  std::vector<double> per_class_dice;  // pooled counts
  std::vector<double> per_class_iou;
  // paired best-of-1 reference drawn from the same runs
  double dice_best1_case_mean = 0;
  double median_best_dice = 0;
  double median_best1_dice = 0;
  std::vector<double> per_case_dice;
  std::vector<double> per_case_miou;

  std::string to_json() const;
  std::string to_table() const;
};

// Best-of-n evaluation over a dataset; pure compute, no file output.
EvalReport evaluate_model(const RunConfig& cfg, SegDiffusionModel<float>& model,
                          const data::Dataset& eval_set, int best_of);

// Full `eval` command: loads the checkpoint, evaluates the resolved val set,
// writes report files (and optional mask rasters) under cfg.out_dir.
EvalReport run_eval(const RunConfig& cfg, const std::string& checkpoint_path);

struct AblateRow {
  std::string variant;  // none | concat | additive
  double f1 = 0;        // percent
  double miou = 0;      // percent
  std::vector<double> per_seed_dice;
};

struct AblateReport {
  std::vector<AblateRow> rows;
  int seeds = 3;
  std::string to_json() const;
  std::string to_table() const;  // Table-3-shaped
};

// Trains {unconditioned, concat, additive} variants over `seeds` seeds on
// identical data and reports mean F-1 / mIoU per variant.
AblateReport run_ablate(const RunConfig& cfg, int seeds = 3);

profiling::ProfileReport run_profile(const RunConfig& cfg);

// Generates a synthetic dataset per data.* and writes it to `out_path`.
std::string run_gendata(const RunConfig& cfg, const std::string& out_path);

// Samples masks for the first `count` val cases and exports them as 8-bit
// rasters with a class-index sidecar; optionally dumps the trace of the
// first case.
struct SampleArtifacts {
  std::vector<std::string> mask_paths;
  std::string class_map_path;
  std::vector<std::string> trace_paths;
};
SampleArtifacts run_sample(const RunConfig& cfg, const std::string& checkpoint_path, int count,
                           bool dump_trace = false);

}  // namespace condiff::commands

#endif  // CONDIFF_COMMANDS_HPP
