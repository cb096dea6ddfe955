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

#include "condiff/training.hpp"

#include <nlohmann/json.hpp>

#include <chrono>

namespace condiff::training {

AdamW::AdamW(std::vector<nn::Parameter<float>*> params, OptimizerConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (auto* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

double AdamW::step() {
  double sq = 0;
  for (auto* p : params_)
    for (int64_t i = 0; i < p->grad.size(); ++i)
      sq += static_cast<double>(p->grad[i]) * p->grad[i];
  const double norm = std::sqrt(sq);
  float scale = 1.0f;
  if (cfg_.clip_norm > 0 && norm > cfg_.clip_norm)
    scale = static_cast<float>(cfg_.clip_norm / norm);

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const float b1 = static_cast<float>(cfg_.beta1), b2 = static_cast<float>(cfg_.beta2);
  const float lr = static_cast<float>(cfg_.lr), wd = static_cast<float>(cfg_.weight_decay);
  const float eps = static_cast<float>(cfg_.eps);
  for (size_t j = 0; j < params_.size(); ++j) {
    auto& p = *params_[j];
    auto& m = m_[j];
    auto& v = v_[j];
    for (int64_t i = 0; i < p.value.size(); ++i) {
      const float g = p.grad[i] * scale;
      m[i] = b1 * m[i] + (1.0f - b1) * g;
      v[i] = b2 * v[i] + (1.0f - b2) * g * g;
      const float mhat = m[i] / static_cast<float>(bc1);
      const float vhat = v[i] / static_cast<float>(bc2);
      p.value[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * p.value[i]);
    }
  }
  return norm;
}

std::vector<double> sample_weights(const std::vector<double>& class_frequencies,
                                   const std::vector<std::vector<char>>& per_sample_presence) {
  const size_t n = per_sample_presence.size();
  if (n == 0) throw std::invalid_argument("sample_weights: empty dataset");
  const size_t K = class_frequencies.size();
  std::vector<double> w(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    if (per_sample_presence[i].size() != K)
      throw std::invalid_argument("sample_weights: presence row size mismatch");
    for (size_t c = 1; c < K; ++c) {
      if (!per_sample_presence[i][c]) continue;
      if (class_frequencies[c] <= 0.0)
        throw std::invalid_argument("sample_weights: class present but global frequency is zero");
      w[i] += 1.0 / class_frequencies[c];
    }
  }
  const double floor = 1e-2 / static_cast<double>(n);
  for (auto& v : w)
    if (v == 0.0) v = floor;
  double sum = 0;
  for (double v : w) sum += v;
  for (auto& v : w) v /= sum;
  return w;
}

std::vector<std::vector<char>> class_presence(const data::Dataset& ds) {
  std::vector<std::vector<char>> presence(ds.size(),
                                          std::vector<char>(static_cast<size_t>(ds.num_classes), 0));
  for (size_t i = 0; i < ds.size(); ++i) {
    const auto& m = ds.samples[i].mask;
    for (int64_t j = 0; j < m.size(); ++j) presence[i][static_cast<size_t>(m[j])] = 1;
  }
  return presence;
}

std::vector<int> draw_weighted(const std::vector<double>& weights, int count, RngStream& rng) {
  std::vector<double> cdf(weights.size());
  double acc = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    cdf[i] = acc;
  }
  std::vector<int> out(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double u = rng.uniform() * acc;
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    out[static_cast<size_t>(i)] =
        static_cast<int>(std::min<size_t>(static_cast<size_t>(it - cdf.begin()), cdf.size() - 1));
  }
  return out;
}

TrainState make_train_state(const RunConfig& cfg) {
  TrainState st;
  RngStream init_rng(cfg.seed);
  st.model = std::make_shared<SegDiffusionModel<float>>(cfg.to_model_config(), init_rng);
  OptimizerConfig oc;
  oc.lr = cfg.lr;
  oc.weight_decay = cfg.weight_decay;
  oc.beta1 = cfg.beta1;
  oc.beta2 = cfg.beta2;
  oc.eps = cfg.adam_eps;
  oc.clip_norm = cfg.clip_norm;
  st.opt = std::make_unique<AdamW>(st.model->params(), oc);
  st.rng = RngStream(cfg.seed).fork(0x7261696eULL);  // training draws
  st.lambda_dice = cfg.lambda_dice;
  st.lambda_ce = cfg.lambda_ce;
  st.dice_smooth = cfg.dice_smooth;
  return st;
}

LossParts train_step(TrainState& state, const Tensor<float>& images, const Tensor<int>& masks,
                     const diffusion::NoiseSchedule& schedule) {
  const int B = images.dim(0), H = images.dim(2), W = images.dim(3);
  const int K = state.model->config().denoiser.num_classes;

  Tensor<float> onehot = diffusion::labels_to_onehot<float>(masks, K);
  Tensor<float> x0 = diffusion::onehot_to_diffusion(onehot);

  // per-sample timestep and noise draws (Alg.-1 lines 3-4)
  std::vector<int> ts(static_cast<size_t>(B));
  for (auto& t : ts) t = state.rng.uniform_int(1, schedule.T());
  Tensor<float> eps = random_normal<float>({B, K, H, W}, state.rng);
  Tensor<float> x_t({B, K, H, W});
  const int64_t per = static_cast<int64_t>(K) * H * W;
  for (int b = 0; b < B; ++b) {
    const double ab = schedule.alpha_bar(ts[static_cast<size_t>(b)]);
    const float cs = static_cast<float>(std::sqrt(ab));
    const float cn = static_cast<float>(std::sqrt(1.0 - ab));
    for (int64_t i = b * per; i < (b + 1) * per; ++i) x_t[i] = cs * x0[i] + cn * eps[i];
  }

  DenoiserOutput<float> out = state.model->forward(x_t, images, ts);
  Tensor<float> dx;
  LossParts parts =
      hybrid_loss(out.x0_hat, onehot, state.lambda_dice, state.lambda_ce, state.dice_smooth, &dx);
  if (!std::isfinite(parts.total)) {
    nlohmann::json snap{{"step", state.step},
                        {"loss", parts.total},
                        {"loss_dice", parts.dice},
                        {"loss_ce", parts.ce},
                        {"x0_hat_finite", out.x0_hat.all_finite()},
                        {"timesteps", ts}};
    throw std::runtime_error("train_step: non-finite loss; diagnostic: " + snap.dump());
  }
  state.model->zero_grad();
  state.model->backward(dx);
  state.opt->step();
  state.step += 1;
  return parts;
}

FitResult fit(const RunConfig& cfg, const data::Dataset& train_set, TrainState& state,
              io::RunLog* log, const EpochCallback& on_epoch) {
  FitResult result;
  if (train_set.samples.empty()) throw std::invalid_argument("fit: empty dataset");
  auto schedule = diffusion::make_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
  const auto freq = data::class_frequencies(train_set);
  const auto weights = sample_weights(freq, class_presence(train_set));
  RngStream sampler_rng = RngStream(cfg.seed).fork(0x73616d70ULL);

  const auto t0 = std::chrono::steady_clock::now();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::vector<int> order =
        draw_weighted(weights, static_cast<int>(train_set.size()), sampler_rng);
    double epoch_loss = 0;
    int epoch_steps = 0;
    for (size_t off = 0; off < order.size(); off += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), off + static_cast<size_t>(cfg.batch_size));
      const std::vector<int> idx(order.begin() + static_cast<std::ptrdiff_t>(off),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
      Tensor<float> images = data::stack_images(train_set, idx);
      Tensor<int> masks = data::stack_masks(train_set, idx);
      LossParts parts = train_step(state, images, masks, schedule);
      epoch_loss += parts.total;
      ++epoch_steps;
      if (log != nullptr && state.step % cfg.log_every == 0) {
        const double wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        nlohmann::json rec{{"step", state.step},       {"epoch", epoch},
                           {"loss", parts.total},      {"loss_dice", parts.dice},
                           {"loss_ce", parts.ce},      {"lr", cfg.lr},
                           {"wall_ms", wall_ms}};
        log->append(rec.dump());
      }
    }
    epoch_loss /= std::max(1, epoch_steps);
    result.epoch_losses.push_back(epoch_loss);
    result.final_epoch_loss = epoch_loss;
    if (log != nullptr) {
      const double wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      nlohmann::json rec{{"epoch", epoch},
                         {"epoch_mean_loss", epoch_loss},
                         {"steps", state.step},
                         {"wall_ms", wall_ms}};
      log->append(rec.dump());
    }
    if (on_epoch) on_epoch(epoch, state);
  }
  result.steps = state.step;
  return result;
}

}  // namespace condiff::training
