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

#ifndef CONDIFF_TRAINING_HPP
#define CONDIFF_TRAINING_HPP

#include "condiff/config.hpp"
#include "condiff/data.hpp"
#include "condiff/diffusion.hpp"
#include "condiff/io.hpp"
#include "condiff/loss.hpp"
#include "condiff/model.hpp"

#include <functional>
#include <memory>

namespace condiff::training {

struct OptimizerConfig {
  double lr = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

// Adam with decoupled weight decay over a fixed parameter registry.
class AdamW {
 public:
  AdamW(std::vector<nn::Parameter<float>*> params, OptimizerConfig cfg);

  // Clips the global grad norm (if configured), then applies one update.
  // Returns the pre-clip global gradient norm.
  double step();

  int64_t steps_taken() const { return t_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  std::vector<nn::Parameter<float>*> params_;
  std::vector<Tensor<float>> m_, v_;
  OptimizerConfig cfg_;
  int64_t t_ = 0;
};

// Per-sample sampling weights from inverse global class-pixel frequency,
// summed over the foreground classes present in each sample, normalized to
// sum 1. Samples with no foreground get a small positive floor so the result
// stays a proper distribution.
std::vector<double> sample_weights(const std::vector<double>& class_frequencies,
                                   const std::vector<std::vector<char>>& per_sample_presence);

std::vector<std::vector<char>> class_presence(const data::Dataset& ds);

// Inverse-CDF draw of `count` indices (with replacement) from normalized
// weights; deterministic given the stream.
std::vector<int> draw_weighted(const std::vector<double>& weights, int count, RngStream& rng);

struct TrainState {
  std::shared_ptr<SegDiffusionModel<float>> model;
  std::unique_ptr<AdamW> opt;
  RngStream rng{0};
  int64_t step = 0;
  double lambda_dice = 0.5;
  double lambda_ce = 0.5;
  double dice_smooth = 1.0;
};

TrainState make_train_state(const RunConfig& cfg);

// One optimizer update: draws per-sample t and eps, corrupts the clean mask,
// predicts x0 through the conditioned denoiser and applies the hybrid loss.
// Aborts with a diagnostic snapshot if the loss goes non-finite.
LossParts train_step(TrainState& state, const Tensor<float>& images, const Tensor<int>& masks,
                     const diffusion::NoiseSchedule& schedule);

struct FitResult {
  int64_t steps = 0;
  double final_epoch_loss = 0;
  std::vector<double> epoch_losses;
};

using EpochCallback = std::function<void(int epoch, TrainState& state)>;

// Epoch loop over the weighted sampler. Appends step and epoch records to the
// run log when one is given; invokes the callback after every epoch (used for
// periodic checkpointing).
FitResult fit(const RunConfig& cfg, const data::Dataset& train_set, TrainState& state,
              io::RunLog* log = nullptr, const EpochCallback& on_epoch = nullptr);

}  // namespace condiff::training

#endif  // CONDIFF_TRAINING_HPP
