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

#ifndef CONDIFF_DIFFUSION_HPP
#define CONDIFF_DIFFUSION_HPP

#include "condiff/tensor.hpp"

#include <vector>

namespace condiff::diffusion {

// Per-timestep forward variances beta_t with the derived alpha_t = 1 - beta_t
// and cumulative products alpha_bar_t. Timesteps are 1-based; alpha_bar(0) is
// defined as 1 so the reverse mean is well formed at t = 1. All schedule math
// is kept in double regardless of the training precision.
class NoiseSchedule {
 public:
  NoiseSchedule(int T, std::vector<double> betas);

  int T() const { return T_; }
  double beta(int t) const { return betas_[check(t) - 1]; }
  double alpha(int t) const { return alphas_[check(t) - 1]; }
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars_[check(t) - 1]; }
  double sigma(int t) const { return std::sqrt(beta(t)); }

  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

 private:
  int check(int t) const {
    if (t < 1 || t > T_) throw std::out_of_range("timestep out of range [1, T]");
    return t;
  }
  int T_;
  std::vector<double> betas_, alphas_, alpha_bars_;
};

// betas interpolated linearly from beta_start to beta_end inclusive.
// Rejects T = 0, bounds outside (0, 1) and beta_start > beta_end.
NoiseSchedule make_schedule(int T, double beta_start, double beta_end);

// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps
template <typename T>
Tensor<T> q_sample(const Tensor<T>& x0, int t, const Tensor<T>& eps, const NoiseSchedule& s) {
  if (!x0.same_shape(eps)) throw std::invalid_argument("q_sample: shape mismatch");
  const double ab = s.alpha_bar(t);  // range-checks t
  const T cs = static_cast<T>(std::sqrt(ab));
  const T cn = static_cast<T>(std::sqrt(1.0 - ab));
  Tensor<T> xt(x0.shape());
  for (int64_t i = 0; i < x0.size(); ++i) xt[i] = cs * x0[i] + cn * eps[i];
  return xt;
}

// mu = sqrt(alpha_t)(1 - abar_{t-1})/(1 - abar_t) x_t
//    + sqrt(abar_{t-1})(1 - alpha_t)/(1 - abar_t) x0_hat
template <typename T>
Tensor<T> posterior_mean(const Tensor<T>& x_t, const Tensor<T>& x0_hat, int t,
                         const NoiseSchedule& s) {
  if (!x_t.same_shape(x0_hat)) throw std::invalid_argument("posterior_mean: shape mismatch");
  const double a = s.alpha(t);
  const double ab = s.alpha_bar(t);
  const double ab_prev = s.alpha_bar(t - 1);
  const T cx = static_cast<T>(std::sqrt(a) * (1.0 - ab_prev) / (1.0 - ab));
  const T c0 = static_cast<T>(std::sqrt(ab_prev) * (1.0 - a) / (1.0 - ab));
  Tensor<T> mu(x_t.shape());
  for (int64_t i = 0; i < x_t.size(); ++i) mu[i] = cx * x_t[i] + c0 * x0_hat[i];
  return mu;
}

// x_{t-1} = mu + sigma_t * noise for t > 1, mu exactly at t = 1.
// sigma_t = sqrt(beta_t).
template <typename T>
Tensor<T> reverse_step(const Tensor<T>& x_t, const Tensor<T>& x0_hat, int t,
                       const NoiseSchedule& s, const Tensor<T>& noise) {
  Tensor<T> x_prev = posterior_mean(x_t, x0_hat, t, s);
  if (t > 1) {
    if (!noise.same_shape(x_t)) throw std::invalid_argument("reverse_step: noise shape mismatch");
    const T sig = static_cast<T>(s.sigma(t));
    for (int64_t i = 0; i < x_prev.size(); ++i) x_prev[i] += sig * noise[i];
  }
  return x_prev;
}

// Generalized posterior q(x_lo | x_hi, x0) for a strided reverse jump
// t_hi -> t_lo (t_lo < t_hi). Reduces to Eq.-9 coefficients at t_lo = t_hi-1.
template <typename T>
Tensor<T> strided_reverse_step(const Tensor<T>& x_t, const Tensor<T>& x0_hat, int t_hi, int t_lo,
                               const NoiseSchedule& s, const Tensor<T>& noise) {
  if (t_lo >= t_hi || t_lo < 0) throw std::invalid_argument("strided_reverse_step: bad (t_hi, t_lo)");
  const double ab_hi = s.alpha_bar(t_hi);
  const double ab_lo = s.alpha_bar(t_lo);
  const double a_step = ab_hi / ab_lo;
  const T cx = static_cast<T>(std::sqrt(a_step) * (1.0 - ab_lo) / (1.0 - ab_hi));
  const T c0 = static_cast<T>(std::sqrt(ab_lo) * (1.0 - a_step) / (1.0 - ab_hi));
  const double var = (1.0 - a_step) * (1.0 - ab_lo) / (1.0 - ab_hi);
  Tensor<T> x_prev(x_t.shape());
  for (int64_t i = 0; i < x_t.size(); ++i) x_prev[i] = cx * x_t[i] + c0 * x0_hat[i];
  if (t_lo > 0) {
    const T sig = static_cast<T>(std::sqrt(var));
    for (int64_t i = 0; i < x_prev.size(); ++i) x_prev[i] += sig * noise[i];
  }
  return x_prev;
}

// ---- Mask value domain -------------------------------------------------
// Clean targets are one-hot over the class axis, rescaled to [-1, 1] before
// entering the forward process. Predictions map back through logits
// (x + 1) / 2 and a per-pixel softmax/argmax.

// labels [B, H, W] (int) -> one-hot [B, K, H, W] in {0, 1}
template <typename T>
Tensor<T> labels_to_onehot(const Tensor<int>& labels, int num_classes) {
  const int B = labels.dim(0), H = labels.dim(1), W = labels.dim(2);
  Tensor<T> y({B, num_classes, H, W});
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) {
        const int k = labels[(static_cast<int64_t>(b) * H + i) * W + j];
        if (k < 0 || k >= num_classes) throw std::out_of_range("label out of class range");
        y.at4(b, k, i, j) = T(1);
      }
  return y;
}

template <typename T>
Tensor<T> onehot_to_diffusion(const Tensor<T>& onehot) {
  Tensor<T> x(onehot.shape());
  for (int64_t i = 0; i < x.size(); ++i) x[i] = T(2) * onehot[i] - T(1);
  return x;
}

// Diffusion-domain prediction -> per-pixel class probabilities via softmax
// of the mapped logits (x + 1) / 2.
template <typename T>
Tensor<T> diffusion_to_probs(const Tensor<T>& x) {
  const int B = x.dim(0), K = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor<T> p(x.shape());
  std::vector<double> logits(K);
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) {
        double mx = -1e300;
        for (int k = 0; k < K; ++k) {
          logits[k] = (static_cast<double>(x.at4(b, k, i, j)) + 1.0) * 0.5;
          mx = std::max(mx, logits[k]);
        }
        double sum = 0;
        for (int k = 0; k < K; ++k) {
          logits[k] = std::exp(logits[k] - mx);
          sum += logits[k];
        }
        for (int k = 0; k < K; ++k) p.at4(b, k, i, j) = static_cast<T>(logits[k] / sum);
      }
  return p;
}

// Per-pixel argmax over the class axis; ties break toward the lower index.
template <typename T>
Tensor<int> argmax_labels(const Tensor<T>& x) {
  const int B = x.dim(0), K = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor<int> labels({B, H, W});
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) {
        int best = 0;
        T bv = x.at4(b, 0, i, j);
        for (int k = 1; k < K; ++k) {
          const T v = x.at4(b, k, i, j);
          if (v > bv) {
            bv = v;
            best = k;
          }
        }
        labels[(static_cast<int64_t>(b) * H + i) * W + j] = best;
      }
  return labels;
}

}  // namespace condiff::diffusion

#endif  // CONDIFF_DIFFUSION_HPP
