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

#ifndef CONDIFF_METRICS_HPP
#define CONDIFF_METRICS_HPP

#include "condiff/tensor.hpp"

namespace condiff::metrics {

struct ConfusionCounts {
  std::vector<int64_t> tp, fp, fn;

  explicit ConfusionCounts(int classes = 0)
      : tp(static_cast<size_t>(classes), 0),
        fp(static_cast<size_t>(classes), 0),
        fn(static_cast<size_t>(classes), 0) {}

  int classes() const { return static_cast<int>(tp.size()); }

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    for (size_t k = 0; k < tp.size(); ++k) {
      tp[k] += o.tp[k];
      fp[k] += o.fp[k];
      fn[k] += o.fn[k];
    }
    return *this;
  }
};

// Exact per-class pixel counts from one-hot masks of identical shape.
template <typename T>
ConfusionCounts confusion(const Tensor<T>& pred, const Tensor<T>& gt) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("confusion: shape mismatch");
  if (pred.rank() != 4) throw std::invalid_argument("confusion: expects [B, K, H, W]");
  const int B = pred.dim(0), K = pred.dim(1);
  const int64_t hw = static_cast<int64_t>(pred.dim(2)) * pred.dim(3);
  ConfusionCounts c(K);
  for (int b = 0; b < B; ++b)
    for (int64_t i = 0; i < hw; ++i) {
      int pk = -1, gk = -1;
      for (int k = 0; k < K; ++k) {
        const T pv = pred[(static_cast<int64_t>(b) * K + k) * hw + i];
        const T gv = gt[(static_cast<int64_t>(b) * K + k) * hw + i];
        if (pv != T(0) && pv != T(1)) throw std::invalid_argument("confusion: pred not one-hot");
        if (gv != T(0) && gv != T(1)) throw std::invalid_argument("confusion: gt not one-hot");
        if (pv == T(1)) {
          if (pk >= 0) throw std::invalid_argument("confusion: pred not one-hot");
          pk = k;
        }
        if (gv == T(1)) {
          if (gk >= 0) throw std::invalid_argument("confusion: gt not one-hot");
          gk = k;
        }
      }
      if (pk < 0 || gk < 0) throw std::invalid_argument("confusion: mask not one-hot");
      if (pk == gk) {
        c.tp[pk]++;
      } else {
        c.fp[pk]++;
        c.fn[gk]++;
      }
    }
  return c;
}

// Label-map convenience wrapper ([B, H, W] integer classes).
ConfusionCounts confusion_labels(const Tensor<int>& pred, const Tensor<int>& gt, int classes);

// Per class 2TP/(2TP+FP+FN); a class absent from both pred and gt scores 1.
std::vector<double> dice_per_class(const ConfusionCounts& c);
// Per class TP/(TP+FP+FN), same absent-class convention.
std::vector<double> iou_per_class(const ConfusionCounts& c);

// Mean over non-background classes (class 0 = background).
double dice_mean_foreground(const ConfusionCounts& c);
double miou_foreground(const ConfusionCounts& c);

}  // namespace condiff::metrics

#endif  // CONDIFF_METRICS_HPP
