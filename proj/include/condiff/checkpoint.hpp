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

#ifndef CONDIFF_CHECKPOINT_HPP
#define CONDIFF_CHECKPOINT_HPP

#include "condiff/model.hpp"

#include <string>
#include <vector>

namespace condiff {

class CheckpointFormatError : public std::runtime_error {
 public:
  explicit CheckpointFormatError(const std::string& what) : std::runtime_error(what) {}
};

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

// Self-describing parameter container: a config snapshot plus named tensors
// (shape, dtype, little-endian payload, per-tensor checksum). The config text
// is preserved verbatim so save(load(f)) reproduces f byte-for-byte.
struct Checkpoint {
  std::string config_text;
  std::vector<NamedTensor> tensors;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint checkpoint_from_model(SegDiffusionModel<float>& model, const std::string& config_text);

// Copies tensors into the model; every parameter must be present with a
// matching shape.
void load_into_model(const Checkpoint& ckpt, SegDiffusionModel<float>& model);

}  // namespace condiff

#endif  // CONDIFF_CHECKPOINT_HPP
