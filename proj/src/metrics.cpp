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

#include "condiff/metrics.hpp"

namespace condiff::metrics {

ConfusionCounts confusion_labels(const Tensor<int>& pred, const Tensor<int>& gt, int classes) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("confusion: shape mismatch");
  ConfusionCounts c(classes);
  for (int64_t i = 0; i < pred.size(); ++i) {
    const int pk = pred[i], gk = gt[i];
    if (pk < 0 || pk >= classes || gk < 0 || gk >= classes)
      throw std::out_of_range("confusion: label out of class range");
    if (pk == gk) {
      c.tp[pk]++;
    } else {
      c.fp[pk]++;
      c.fn[gk]++;
    }
  }
  return c;
}

std::vector<double> dice_per_class(const ConfusionCounts& c) {
  std::vector<double> out(c.tp.size());
  for (size_t k = 0; k < c.tp.size(); ++k) {
    const int64_t den = 2 * c.tp[k] + c.fp[k] + c.fn[k];
    out[k] = den == 0 ? 1.0 : 2.0 * static_cast<double>(c.tp[k]) / static_cast<double>(den);
  }
  return out;
}

std::vector<double> iou_per_class(const ConfusionCounts& c) {
  std::vector<double> out(c.tp.size());
  for (size_t k = 0; k < c.tp.size(); ++k) {
    const int64_t den = c.tp[k] + c.fp[k] + c.fn[k];
    out[k] = den == 0 ? 1.0 : static_cast<double>(c.tp[k]) / static_cast<double>(den);
  }
  return out;
}

namespace {
double mean_foreground(const std::vector<double>& v) {
  if (v.size() < 2) throw std::invalid_argument("metrics: need at least one foreground class");
  double sum = 0;
  for (size_t k = 1; k < v.size(); ++k) sum += v[k];
  return sum / static_cast<double>(v.size() - 1);
}
}  // namespace

double dice_mean_foreground(const ConfusionCounts& c) { return mean_foreground(dice_per_class(c)); }

double miou_foreground(const ConfusionCounts& c) { return mean_foreground(iou_per_class(c)); }

}  // namespace condiff::metrics
