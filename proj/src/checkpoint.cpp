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

#include "condiff/checkpoint.hpp"

#include "condiff/io.hpp"

#include <cstring>
#include <unordered_map>

namespace condiff {

namespace {
constexpr char kMagic[4] = {'C', 'D', 'C', 'K'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kDtypeF32 = 0;
}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path);
  f.write(kMagic, 4);
  io::write_u32(f, kVersion);
  io::write_u64(f, ckpt.config_text.size());
  io::write_bytes(f, ckpt.config_text.data(), ckpt.config_text.size());
  io::write_u32(f, static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    io::write_string(f, t.name);
    io::write_u32(f, kDtypeF32);
    io::write_u32(f, static_cast<uint32_t>(t.shape.size()));
    for (int d : t.shape) io::write_u32(f, static_cast<uint32_t>(d));
    const size_t bytes = t.data.size() * sizeof(float);
    io::write_u64(f, bytes);
    io::write_bytes(f, t.data.data(), bytes);
    io::write_u32(f, io::crc32(t.data.data(), bytes));
  }
  if (!f) throw std::runtime_error("write failure: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointFormatError("cannot open checkpoint: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointFormatError("checkpoint format error: bad magic in " + path);
  try {
    const uint32_t version = io::read_u32(f);
    if (version != kVersion)
      throw CheckpointFormatError("checkpoint format error: unsupported version " +
                                  std::to_string(version));
    Checkpoint ckpt;
    const uint64_t cfg_len = io::read_u64(f);
    ckpt.config_text.resize(cfg_len);
    if (cfg_len > 0) io::read_bytes(f, ckpt.config_text.data(), cfg_len);
    const uint32_t count = io::read_u32(f);
    ckpt.tensors.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
      NamedTensor t;
      t.name = io::read_string(f);
      const uint32_t dtype = io::read_u32(f);
      if (dtype != kDtypeF32)
        throw CheckpointFormatError("checkpoint format error: unsupported dtype code " +
                                    std::to_string(dtype));
      const uint32_t rank = io::read_u32(f);
      int64_t numel = 1;
      for (uint32_t r = 0; r < rank; ++r) {
        const int d = static_cast<int>(io::read_u32(f));
        t.shape.push_back(d);
        numel *= d;
      }
      const uint64_t bytes = io::read_u64(f);
      if (bytes != static_cast<uint64_t>(numel) * sizeof(float))
        throw CheckpointFormatError("checkpoint format error: payload size mismatch for " + t.name);
      t.data.resize(static_cast<size_t>(numel));
      io::read_bytes(f, t.data.data(), bytes);
      const uint32_t stored = io::read_u32(f);
      if (stored != io::crc32(t.data.data(), bytes))
        throw CheckpointFormatError("checkpoint format error: checksum mismatch for " + t.name);
      ckpt.tensors.push_back(std::move(t));
    }
    return ckpt;
  } catch (const std::runtime_error& e) {
    if (dynamic_cast<const CheckpointFormatError*>(&e)) throw;
    throw CheckpointFormatError(std::string("checkpoint format error: ") + e.what());
  }
}

Checkpoint checkpoint_from_model(SegDiffusionModel<float>& model, const std::string& config_text) {
  Checkpoint ckpt;
  ckpt.config_text = config_text;
  for (auto* p : model.params()) {
    NamedTensor t;
    t.name = p->name;
    t.shape = p->value.shape();
    t.data.assign(p->value.data(), p->value.data() + p->value.size());
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

void load_into_model(const Checkpoint& ckpt, SegDiffusionModel<float>& model) {
  std::unordered_map<std::string, const NamedTensor*> by_name;
  for (const auto& t : ckpt.tensors) by_name[t.name] = &t;
  for (auto* p : model.params()) {
    const auto it = by_name.find(p->name);
    if (it == by_name.end())
      throw std::invalid_argument("checkpoint missing parameter: " + p->name);
    const NamedTensor& t = *it->second;
    if (t.shape != p->value.shape())
      throw std::invalid_argument("checkpoint/config dim mismatch for parameter: " + p->name);
    std::copy(t.data.begin(), t.data.end(), p->value.data());
  }
}

}  // namespace condiff
