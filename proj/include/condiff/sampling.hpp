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

#ifndef CONDIFF_SAMPLING_HPP
#define CONDIFF_SAMPLING_HPP

#include "condiff/diffusion.hpp"
#include "condiff/metrics.hpp"
#include "condiff/model.hpp"

namespace condiff::sampling {

enum class ConsensusMode { kMeanLastK, kMajorityVote };

struct ConsensusConfig {
  ConsensusMode mode = ConsensusMode::kMeanLastK;
  int k = 10;  // window over the trace tail; clamped to the trace length
};

// Ordered intermediate clean-mask predictions, one per reverse step.
template <typename T>
struct PredictionTrace {
  std::vector<Tensor<T>> entries;
  size_t length() const { return entries.size(); }
};

// Fuses the trace tail into one discrete one-hot mask. Mean mode averages the
// per-pixel class probabilities of the last k entries then takes argmax;
// majority mode takes per-entry argmax and a plurality vote. Ties break
// toward the lower class index.
template <typename T>
Tensor<T> consensus(const PredictionTrace<T>& trace, const ConsensusConfig& cfg) {
  if (trace.entries.empty()) throw std::invalid_argument("consensus: empty trace");
  const int k = std::min<int>(std::max(1, cfg.k), static_cast<int>(trace.entries.size()));
  const auto& shape = trace.entries.back().shape();
  const int B = shape[0], K = shape[1], H = shape[2], W = shape[3];
  Tensor<int> labels({B, H, W});

  if (cfg.mode == ConsensusMode::kMeanLastK) {
    Tensor<T> acc(shape);
    for (size_t i = trace.entries.size() - static_cast<size_t>(k); i < trace.entries.size(); ++i) {
      Tensor<T> p = diffusion::diffusion_to_probs(trace.entries[i]);
      acc += p;
    }
    labels = diffusion::argmax_labels(acc);
  } else {
    std::vector<int> votes(static_cast<size_t>(B) * H * W * K, 0);
    for (size_t i = trace.entries.size() - static_cast<size_t>(k); i < trace.entries.size(); ++i) {
      Tensor<int> l = diffusion::argmax_labels(trace.entries[i]);
      for (int64_t j = 0; j < l.size(); ++j) votes[static_cast<size_t>(j) * K + l[j]]++;
    }
    for (int64_t j = 0; j < labels.size(); ++j) {
      int best = 0, bv = votes[static_cast<size_t>(j) * K];
      for (int c = 1; c < K; ++c)
        if (votes[static_cast<size_t>(j) * K + c] > bv) {
          bv = votes[static_cast<size_t>(j) * K + c];
          best = c;
        }
      labels[j] = best;
    }
  }
  return diffusion::labels_to_onehot<T>(labels, K);
}

template <typename T>
struct SampleResult {
  Tensor<T> mask;       // one-hot [B, K, H, W]
  Tensor<int> labels;   // [B, H, W]
  PredictionTrace<T> trace;
};

// Alg.-2 style conditioned reverse loop: start from standard normal noise,
// predict x0 at every step, collect the trace, and fuse it at the end. An
// optional uniform timestep stride (> 1) shortens the loop; the default runs
// every step.
template <typename T>
SampleResult<T> sample(SegDiffusionModel<T>& model, const Tensor<T>& images,
                       const diffusion::NoiseSchedule& schedule, RngStream& rng,
                       const ConsensusConfig& ccfg, int stride = 1, bool keep_trace = true) {
  if (stride < 1) throw std::invalid_argument("sample: stride must be >= 1");
  const int B = images.dim(0), H = images.dim(2), W = images.dim(3);
  const int K = model.config().denoiser.num_classes;
  Tensor<T> x = random_normal<T>({B, K, H, W}, rng);

  SampleResult<T> res;
  PredictionTrace<T> tail;  // only the consensus window is retained when !keep_trace
  const size_t window = static_cast<size_t>(std::max(1, ccfg.k));
  int t = schedule.T();
  std::vector<int> ts(static_cast<size_t>(B));
  while (t >= 1) {
    std::fill(ts.begin(), ts.end(), t);
    DenoiserOutput<T> out = model.forward(x, images, ts);
    tail.entries.push_back(std::move(out.x0_hat));
    if (!keep_trace && tail.entries.size() > window) tail.entries.erase(tail.entries.begin());
    const Tensor<T>& x0_hat = tail.entries.back();
    if (stride == 1) {
      if (t > 1) {
        Tensor<T> noise = random_normal<T>({B, K, H, W}, rng);
        x = diffusion::reverse_step(x, x0_hat, t, schedule, noise);
      } else {
        x = diffusion::posterior_mean(x, x0_hat, t, schedule);
      }
      --t;
    } else {
      const int lo = std::max(t - stride, 0);
      Tensor<T> noise =
          lo > 0 ? random_normal<T>({B, K, H, W}, rng) : Tensor<T>({B, K, H, W});
      x = diffusion::strided_reverse_step(x, x0_hat, t, lo, schedule, noise);
      t = lo;
    }
  }
  res.mask = consensus(tail, ccfg);
  res.labels = diffusion::argmax_labels(res.mask);
  res.trace = std::move(tail);
  return res;
}

struct BestOfResult {
  Tensor<int> labels;              // per-case best mask [B, H, W]
  std::vector<double> best_dice;   // per-case mean-foreground Dice of the kept mask
  std::vector<double> first_dice;  // per-case Dice of the first draw (a best-of-1 reference)
};

// Draws n independent samples per case, scores each against the ground truth
// by mean-foreground Dice and keeps the per-case maximizer. Evaluation only.
template <typename T>
BestOfResult best_of_n(SegDiffusionModel<T>& model, const Tensor<T>& images,
                       const Tensor<int>& gt_labels, const diffusion::NoiseSchedule& schedule,
                       int n, RngStream& rng, const ConsensusConfig& ccfg, int stride = 1) {
  if (n < 1) throw std::invalid_argument("best_of_n: n must be >= 1");
  const int B = images.dim(0), H = images.dim(2), W = images.dim(3);
  const int K = model.config().denoiser.num_classes;
  BestOfResult best;
  best.labels = Tensor<int>({B, H, W});
  best.best_dice.assign(static_cast<size_t>(B), -1.0);
  best.first_dice.assign(static_cast<size_t>(B), 0.0);
  const int64_t hw = static_cast<int64_t>(H) * W;
  for (int run = 0; run < n; ++run) {
    RngStream run_rng = rng.fork(static_cast<uint64_t>(run));
    SampleResult<T> s = sample(model, images, schedule, run_rng, ccfg, stride, /*keep_trace=*/false);
    for (int b = 0; b < B; ++b) {
      Tensor<int> pred({1, H, W}), gt({1, H, W});
      std::copy(s.labels.data() + b * hw, s.labels.data() + (b + 1) * hw, pred.data());
      std::copy(gt_labels.data() + b * hw, gt_labels.data() + (b + 1) * hw, gt.data());
      const double d = metrics::dice_mean_foreground(metrics::confusion_labels(pred, gt, K));
      if (run == 0) best.first_dice[static_cast<size_t>(b)] = d;
      if (d > best.best_dice[static_cast<size_t>(b)]) {
        best.best_dice[static_cast<size_t>(b)] = d;
        std::copy(pred.data(), pred.data() + hw, best.labels.data() + b * hw);
      }
    }
  }
  return best;
}

}  // namespace condiff::sampling

#endif  // CONDIFF_SAMPLING_HPP
