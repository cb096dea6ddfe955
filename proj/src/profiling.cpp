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

#include "condiff/profiling.hpp"

#include "condiff/loss.hpp"
#include "condiff/training.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <fstream>
#include <sstream>

namespace condiff::profiling {

std::string ProfileReport::to_json() const {
  nlohmann::json j{{"trainable_params", trainable_params},
                   {"train_ms_per_step", {{"mean", train_ms_mean}, {"std", train_ms_std}}},
                   {"infer_ms_per_image", {{"mean", infer_ms_mean}, {"std", infer_ms_std}}},
                   {"warmup", warmup},
                   {"iters", iters},
                   {"resolution", resolution},
                   {"batch_size", batch_size},
                   {"device", device},
                   {"notes", notes}};
  if (reserved_memory_mb)
    j["reserved_memory_mb"] = *reserved_memory_mb;
  else
    j["reserved_memory_mb"] = "unavailable";
  if (typical_memory_mb)
    j["typical_memory_mb"] = *typical_memory_mb;
  else
    j["typical_memory_mb"] = "unavailable";
  return j.dump();
}

std::string ProfileReport::to_table() const {
  auto mem = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    std::ostringstream os;
    os.precision(1);
    os << std::fixed << *v;
    return os.str();
  };
  std::ostringstream os;
  os << "Model        Parameter #.   Memory (mb)          Time (ms/image)\n";
  os << "                            Reserved   Typical   Train      Sample\n";
  os.precision(2);
  os << std::fixed;
  os << "condiff      " << trainable_params << "        " << mem(reserved_memory_mb) << "        "
     << mem(typical_memory_mb) << "      " << train_ms_mean << " +- " << train_ms_std << "   "
     << infer_ms_mean << " +- " << infer_ms_std << "\n";
  os << "(device: " << device << ", resolution " << resolution << ", batch " << batch_size
     << ", warmup " << warmup << ", iters " << iters << ")\n";
  return os.str();
}

TimingStats measure(const std::function<void()>& fn, int warmup, int iters) {
  if (iters < 1) throw std::invalid_argument("measure: iters must be >= 1");
  for (int i = 0; i < warmup; ++i) fn();
  TimingStats stats;
  stats.samples_ms.reserve(static_cast<size_t>(iters));
  for (int i = 0; i < iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    stats.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  double sum = 0;
  for (double v : stats.samples_ms) sum += v;
  stats.mean_ms = sum / iters;
  double sq = 0;
  for (double v : stats.samples_ms) sq += (v - stats.mean_ms) * (v - stats.mean_ms);
  stats.std_ms = iters > 1 ? std::sqrt(sq / (iters - 1)) : 0.0;
  return stats;
}

std::optional<double> peak_rss_mb() {
  std::ifstream f("/proc/self/status");
  if (!f) return std::nullopt;
  std::string line;
  while (std::getline(f, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      std::istringstream is(line.substr(6));
      double kb = 0;
      is >> kb;
      if (kb > 0) return kb / 1024.0;
    }
  }
  return std::nullopt;
}

ProfileReport profile(SegDiffusionModel<float>& model, const diffusion::NoiseSchedule& schedule,
                      int resolution, int batch_size, int warmup, int iters, uint64_t seed) {
  ProfileReport rep;
  rep.trainable_params = count_params(model);
  rep.warmup = warmup;
  rep.iters = iters;
  rep.resolution = resolution;
  rep.batch_size = batch_size;
  rep.device = "cpu";

  const int K = model.config().denoiser.num_classes;
  const int C = model.config().image_channels;
  RngStream rng(seed);

  try {
    // synthetic profiling inputs
    Tensor<float> images({batch_size, C, resolution, resolution});
    for (int64_t i = 0; i < images.size(); ++i)
      images[i] = static_cast<float>(rng.uniform());
    Tensor<int> masks({batch_size, resolution, resolution});
    for (int64_t i = 0; i < masks.size(); ++i) masks[i] = rng.uniform_int(0, K - 1);

    training::TrainState st;
    st.model = std::shared_ptr<SegDiffusionModel<float>>(&model, [](SegDiffusionModel<float>*) {});
    st.opt = std::make_unique<training::AdamW>(model.params(), training::OptimizerConfig{});
    st.rng = rng.fork(1);

    TimingStats train_stats = measure(
        [&] { training::train_step(st, images, masks, schedule); }, warmup, iters);
    rep.train_ms_mean = train_stats.mean_ms;
    rep.train_ms_std = train_stats.std_ms;

    Tensor<float> one_image({1, C, resolution, resolution});
    std::copy(images.data(), images.data() + one_image.size(), one_image.data());
    Tensor<float> x_t = random_normal<float>({1, K, resolution, resolution}, rng);
    std::vector<int> ts{schedule.T()};
    TimingStats infer_stats =
        measure([&] { model.forward(x_t, one_image, ts); }, warmup, iters);
    rep.infer_ms_mean = infer_stats.mean_ms;
    rep.infer_ms_std = infer_stats.std_ms;
  } catch (const std::bad_alloc&) {
    rep.notes = "out-of-memory during profiling";
  }

  rep.typical_memory_mb = peak_rss_mb();
  rep.reserved_memory_mb = std::nullopt;  // no allocator reservation probe on CPU
  if (rep.notes.empty() && !rep.reserved_memory_mb)
    rep.notes = "reserved-memory probe unavailable on this host";
  return rep;
}

}  // namespace condiff::profiling
