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

#ifndef CONDIFF_DATA_HPP
#define CONDIFF_DATA_HPP

#include "condiff/tensor.hpp"

#include <string>
#include <vector>

namespace condiff::data {

class DatasetFormatError : public std::runtime_error {
 public:
  explicit DatasetFormatError(const std::string& what) : std::runtime_error(what) {}
};

struct Sample {
  Tensor<float> image;  // [C_img, H, W], values in [0, 1]
  Tensor<int> mask;     // [H, W], class labels in {0..K-1}
  std::string id;
};

struct Dataset {
  int num_classes = 0;
  std::vector<Sample> samples;

  size_t size() const { return samples.size(); }
  int channels() const { return samples.empty() ? 0 : samples.front().image.dim(0); }
  int height() const { return samples.empty() ? 0 : samples.front().image.dim(1); }
  int width() const { return samples.empty() ? 0 : samples.front().image.dim(2); }
};

// Synthetic multi-organ stand-in: K-1 soft-edged ellipses with
// class-correlated intensity bands over background texture noise. The mask is
// the exact generating geometry. The last foreground class is rare (present
// with probability rare_rate) to exercise the weighted sampler. Deterministic
// per seed.
Dataset generate_synthetic(int n, int num_classes, int height, int width, uint64_t seed,
                           double rare_rate = 0.2, int stride_divisor = 1);

// Single-file binary container; save -> load round-trips bit-exactly.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// Exact per-class pixel frequencies (sum to 1).
std::vector<double> class_frequencies(const Dataset& ds);

// Stack a subset of samples into batch tensors: images [B, C, H, W] and
// label maps [B, H, W].
Tensor<float> stack_images(const Dataset& ds, const std::vector<int>& indices);
Tensor<int> stack_masks(const Dataset& ds, const std::vector<int>& indices);

}  // namespace condiff::data

#endif  // CONDIFF_DATA_HPP
