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

#ifndef CONDIFF_LOSS_HPP
#define CONDIFF_LOSS_HPP

#include "condiff/tensor.hpp"

namespace condiff {

struct LossParts {
  double total = 0;
  double dice = 0;
  double ce = 0;
};

// Hybrid Dice + cross-entropy loss between a diffusion-domain prediction and
// a one-hot clean mask. The prediction maps to class logits via (x + 1) / 2,
// then per-pixel softmax; soft Dice is averaged per sample per class with
// smoothing in numerator and denominator. Optionally writes d(total)/d(x0_hat).
template <typename T>
LossParts hybrid_loss(const Tensor<T>& x0_hat, const Tensor<T>& x0, double lambda_dice,
                      double lambda_ce, double smooth = 1.0, Tensor<T>* dx = nullptr) {
  if (!x0_hat.same_shape(x0)) throw std::invalid_argument("hybrid_loss: shape mismatch");
  if (x0_hat.rank() != 4) throw std::invalid_argument("hybrid_loss: expects [B, K, H, W]");
  const int B = x0.dim(0), K = x0.dim(1), H = x0.dim(2), W = x0.dim(3);
  const int64_t hw = static_cast<int64_t>(H) * W;
  const double pix_norm = 1.0 / (static_cast<double>(B) * hw);

  // validate one-hot target
  for (int b = 0; b < B; ++b)
    for (int64_t i = 0; i < hw; ++i) {
      double sum = 0;
      for (int k = 0; k < K; ++k) {
        const double g = x0[(static_cast<int64_t>(b) * K + k) * hw + i];
        if (g != 0.0 && g != 1.0) throw std::invalid_argument("hybrid_loss: x0 is not one-hot");
        sum += g;
      }
      if (sum != 1.0) throw std::invalid_argument("hybrid_loss: x0 is not one-hot");
    }

  // per-pixel softmax over classes of the mapped logits
  Tensor<double> probs({B, K, H, W});
  std::vector<double> l(K);
  for (int b = 0; b < B; ++b)
    for (int64_t i = 0; i < hw; ++i) {
      double mx = -1e300;
      for (int k = 0; k < K; ++k) {
        l[k] = (static_cast<double>(x0_hat[(static_cast<int64_t>(b) * K + k) * hw + i]) + 1.0) * 0.5;
        mx = std::max(mx, l[k]);
      }
      double sum = 0;
      for (int k = 0; k < K; ++k) {
        l[k] = std::exp(l[k] - mx);
        sum += l[k];
      }
      for (int k = 0; k < K; ++k)
        probs[(static_cast<int64_t>(b) * K + k) * hw + i] = l[k] / sum;
    }

  // cross-entropy and soft Dice accumulators
  double ce = 0;
  std::vector<double> inter(static_cast<size_t>(B) * K), punion(static_cast<size_t>(B) * K);
  for (int b = 0; b < B; ++b)
    for (int k = 0; k < K; ++k) {
      const int64_t off = (static_cast<int64_t>(b) * K + k) * hw;
      double I = 0, Ps = 0, Gs = 0;
      for (int64_t i = 0; i < hw; ++i) {
        const double p = probs[off + i], g = x0[off + i];
        if (g == 1.0) ce -= std::log(std::max(p, 1e-300));
        I += p * g;
        Ps += p;
        Gs += g;
      }
      inter[static_cast<size_t>(b) * K + k] = I;
      punion[static_cast<size_t>(b) * K + k] = Ps + Gs;
    }
  ce *= pix_norm;

  double dice_mean = 0;
  for (size_t i = 0; i < inter.size(); ++i)
    dice_mean += (2.0 * inter[i] + smooth) / (punion[i] + smooth);
  dice_mean /= static_cast<double>(B * K);
  const double dice_loss = 1.0 - dice_mean;

  LossParts parts;
  parts.dice = dice_loss;
  parts.ce = ce;
  parts.total = lambda_dice * dice_loss + lambda_ce * ce;

  if (dx != nullptr) {
    *dx = Tensor<T>(x0_hat.shape());
    const double cls_norm = 1.0 / static_cast<double>(B * K);
    std::vector<double> dp(K);
    for (int b = 0; b < B; ++b)
      for (int64_t i = 0; i < hw; ++i) {
        // dL/dp from the Dice term
        for (int k = 0; k < K; ++k) {
          const size_t bk = static_cast<size_t>(b) * K + k;
          const int64_t off = (static_cast<int64_t>(b) * K + k) * hw;
          const double g = x0[off + i];
          const double U = punion[bk] + smooth, num = 2.0 * inter[bk] + smooth;
          const double ddice_dp = (2.0 * g * U - num) / (U * U);
          dp[k] = -lambda_dice * cls_norm * ddice_dp;
        }
        // chain Dice through softmax, add the closed-form CE-softmax term
        double dot = 0;
        for (int k = 0; k < K; ++k)
          dot += dp[k] * probs[(static_cast<int64_t>(b) * K + k) * hw + i];
        for (int k = 0; k < K; ++k) {
          const int64_t off = (static_cast<int64_t>(b) * K + k) * hw;
          const double p = probs[off + i], g = x0[off + i];
          const double dlogit = p * (dp[k] - dot) + lambda_ce * pix_norm * (p - g);
          (*dx)[off + i] = static_cast<T>(0.5 * dlogit);  // d logits / d x0_hat = 1/2
        }
      }
  }
  return parts;
}

}  // namespace condiff

#endif  // CONDIFF_LOSS_HPP
