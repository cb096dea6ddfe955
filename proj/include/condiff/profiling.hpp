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

#ifndef CONDIFF_PROFILING_HPP
#define CONDIFF_PROFILING_HPP

#include "condiff/diffusion.hpp"
#include "condiff/model.hpp"

#include <functional>
#include <optional>
#include <string>

namespace condiff::profiling {

// Five-quantity efficiency report: trainable parameters, reserved and typical
// memory, mean training-step time, mean per-image inference time. Memory
// probes that cannot be measured on the host are reported as unavailable,
// never as zero.
struct ProfileReport {
  int64_t trainable_params = 0;
  std::optional<double> reserved_memory_mb;  // allocator peak; unavailable on CPU-only hosts
  std::optional<double> typical_memory_mb;   // process peak resident set
  double train_ms_mean = 0;
  double train_ms_std = 0;
  double infer_ms_mean = 0;
  double infer_ms_std = 0;
  int warmup = 0;
  int iters = 0;
  int resolution = 0;
  int batch_size = 0;
  std::string device;
  std::string notes;

  std::string to_json() const;
  std::string to_table() const;  // Parameter / Memory / Time columns
};

// Exact element count over the trainable parameter registry.
template <typename M>
int64_t count_params(M& model) {
  int64_t n = 0;
  for (auto* p : model.params()) n += p->value.size();
  return n;
}

struct TimingStats {
  double mean_ms = 0;
  double std_ms = 0;
  std::vector<double> samples_ms;  // exactly the post-warmup timings
};

// Runs `warmup` untimed then `iters` timed invocations on a monotonic clock.
TimingStats measure(const std::function<void()>& fn, int warmup, int iters);

// Process peak resident set in MB from the OS, when the probe exists.
std::optional<double> peak_rss_mb();

// Timed training steps (forward + backward + update) and timed single-image
// inference forwards on synthetic inputs at the given resolution.
ProfileReport profile(SegDiffusionModel<float>& model, const diffusion::NoiseSchedule& schedule,
                      int resolution, int batch_size, int warmup, int iters, uint64_t seed = 17);

}  // namespace condiff::profiling

#endif  // CONDIFF_PROFILING_HPP
