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

#ifndef CONDIFF_CONFIG_HPP
#define CONDIFF_CONFIG_HPP

#include "condiff/adapter.hpp"
#include "condiff/denoiser.hpp"
#include "condiff/model.hpp"
#include "condiff/sampling.hpp"

#include <string>
#include <vector>

namespace condiff {

// Full experiment description. Serialized as flat "section.key = value" text;
// unknown keys are parse errors, and validation reports every invalid field
// in one pass before any compute starts.
struct RunConfig {
  // run
  uint64_t seed = 0;
  std::string out_dir = "runs/default";

  // schedule
  int T = 100;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  // model
  int classes = 4;
  int image_channels = 1;
  std::string fusion_mode = "additive";   // additive | concat
  std::string conditioning = "pvt";       // pvt | none
  int time_dim = 128;

  // adapter
  std::vector<int> stage_dims = {32, 64, 160, 256};
  std::vector<int> strides = {4, 2, 2, 2};
  std::vector<int> reduction_ratios = {8, 4, 2, 1};
  std::vector<int> heads = {1, 2, 5, 8};
  std::vector<int> depths = {2, 2, 2, 2};
  int mlp_ratio = 4;

  // denoiser
  std::vector<int> denoiser_channels = {32, 64, 160, 256};

  // loss
  double lambda_dice = 0.5;
  double lambda_ce = 0.5;
  double dice_smooth = 1.0;

  // optim
  double lr = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;

  // train
  int epochs = 10;
  int batch_size = 16;
  int checkpoint_every = 5;
  int log_every = 1;

  // consensus / sampling
  std::string consensus_mode = "mean-last-k";  // mean-last-k | majority-vote
  int consensus_k = 10;
  int sample_stride = 1;

  // eval
  int best_of = 4;
  int eval_batch = 10;
  bool export_masks = false;

  // data
  std::string data_source = "synthetic";  // synthetic | file
  std::string data_path;
  int train_n = 200;
  int val_n = 50;
  int data_size = 64;
  uint64_t data_seed = 1234;
  double rare_rate = 0.2;

  // profile
  int profile_warmup = 5;
  int profile_iters = 20;
  int profile_resolution = 64;
  int profile_batch = 1;

  ModelConfig to_model_config() const;
  sampling::ConsensusConfig to_consensus_config() const;
};

// Parses flat key-value text. Unknown keys and malformed values are collected
// into `errors`; the returned config holds every field that did parse.
RunConfig parse_config_text(const std::string& text, std::vector<std::string>& errors);
RunConfig load_config_file(const std::string& path, std::vector<std::string>& errors);

// Applies a single "key=value" override.
void apply_override(RunConfig& cfg, const std::string& key_value,
                    std::vector<std::string>& errors);

// Canonical serialization: every key, fixed order, parseable back.
std::string serialize_config(const RunConfig& cfg);

// Cross-field validation; returns every violation found.
std::vector<std::string> validate_config(const RunConfig& cfg);

}  // namespace condiff

#endif  // CONDIFF_CONFIG_HPP
