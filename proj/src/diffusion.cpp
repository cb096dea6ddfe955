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

#include "condiff/diffusion.hpp"

namespace condiff::diffusion {

NoiseSchedule::NoiseSchedule(int T, std::vector<double> betas) : T_(T), betas_(std::move(betas)) {
  if (T_ < 1) throw std::invalid_argument("schedule: T must be >= 1");
  if (static_cast<int>(betas_.size()) != T_) throw std::invalid_argument("schedule: betas size != T");
  alphas_.resize(T_);
  alpha_bars_.resize(T_);
  double prod = 1.0;
  for (int i = 0; i < T_; ++i) {
    if (!(betas_[i] > 0.0 && betas_[i] < 1.0))
      throw std::invalid_argument("schedule: beta_t must lie in (0, 1)");
    alphas_[i] = 1.0 - betas_[i];
    prod *= alphas_[i];
    alpha_bars_[i] = prod;
  }
}

NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
  if (T < 1) throw std::invalid_argument("make_schedule: T must be >= 1");
  if (!(beta_start > 0.0 && beta_end < 1.0))
    throw std::invalid_argument("make_schedule: beta bounds must lie in (0, 1)");
  if (beta_start > beta_end)
    throw std::invalid_argument("make_schedule: beta_start > beta_end");
  std::vector<double> betas(T);
  if (T == 1) {
    betas[0] = beta_start;
  } else {
    for (int i = 0; i < T; ++i)
      betas[i] = beta_start + (beta_end - beta_start) * static_cast<double>(i) / (T - 1);
  }
  return NoiseSchedule(T, std::move(betas));
}

}  // namespace condiff::diffusion
