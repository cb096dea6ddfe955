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

#include "condiff/data.hpp"

#include "condiff/io.hpp"

#include <algorithm>
#include <cstring>

namespace condiff::data {

namespace {
constexpr char kMagic[4] = {'C', 'D', 'D', 'S'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kDtypeF32 = 0;
constexpr uint32_t kDtypeU8 = 1;

// 3x3 box blur used for the background texture.
void blur3(std::vector<float>& img, int H, int W) {
  std::vector<float> out(img.size());
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      float acc = 0;
      int cnt = 0;
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          const int y = i + di, x = j + dj;
          if (y < 0 || y >= H || x < 0 || x >= W) continue;
          acc += img[static_cast<size_t>(y) * W + x];
          ++cnt;
        }
      out[static_cast<size_t>(i) * W + j] = acc / static_cast<float>(cnt);
    }
  img.swap(out);
}
}  // namespace

Dataset generate_synthetic(int n, int num_classes, int height, int width, uint64_t seed,
                           double rare_rate, int stride_divisor) {
  if (num_classes < 2) throw std::invalid_argument("generate_synthetic: K must be >= 2");
  if (n < 0) throw std::invalid_argument("generate_synthetic: n must be >= 0");
  if (stride_divisor > 1 && (height % stride_divisor != 0 || width % stride_divisor != 0))
    throw std::invalid_argument("generate_synthetic: size not divisible by model strides");

  Dataset ds;
  ds.num_classes = num_classes;
  ds.samples.reserve(static_cast<size_t>(n));
  RngStream base(seed);
  const int H = height, W = width;

  for (int idx = 0; idx < n; ++idx) {
    RngStream rng = base.fork(static_cast<uint64_t>(idx));
    Sample s;
    s.id = "synth-" + std::to_string(idx);
    s.mask = Tensor<int>({H, W});
    s.image = Tensor<float>({1, H, W});

    // background texture: smoothed uniform noise in a low band
    std::vector<float> img(static_cast<size_t>(H) * W);
    for (auto& v : img) v = static_cast<float>(rng.uniform());
    blur3(img, H, W);
    for (auto& v : img) v = 0.08f + 0.12f * v;

    // one ellipse per foreground class, painted in class order; the last
    // class appears only in a rare_rate fraction of samples
    for (int c = 1; c < num_classes; ++c) {
      const bool rare = (c == num_classes - 1) && (num_classes > 2);
      const bool present = !rare || rng.uniform() < rare_rate;
      const double cx = (0.25 + 0.5 * rng.uniform()) * W;
      const double cy = (0.25 + 0.5 * rng.uniform()) * H;
      const double a = (0.12 + 0.10 * rng.uniform()) * W;
      const double b = (0.12 + 0.10 * rng.uniform()) * H;
      const double theta = rng.uniform() * M_PI;
      const double band = num_classes > 2
                              ? 0.35 + 0.5 * static_cast<double>(c - 1) / (num_classes - 2)
                              : 0.6;
      const double intensity = band + 0.03 * (rng.uniform() - 0.5);
      if (!present) continue;
      const double ct = std::cos(theta), st = std::sin(theta);
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          const double dx = j + 0.5 - cx, dy = i + 0.5 - cy;
          const double u = (dx * ct + dy * st) / a;
          const double v = (-dx * st + dy * ct) / b;
          const double q = u * u + v * v;
          if (q <= 1.0) s.mask[static_cast<int64_t>(i) * W + j] = c;
          // soft intensity edge; the mask stays the exact hard geometry
          const double soft = 1.0 / (1.0 + std::exp((q - 1.0) / 0.08));
          if (soft > 1e-3) {
            float& px = img[static_cast<size_t>(i) * W + j];
            px = static_cast<float>(px * (1.0 - soft) + intensity * soft);
          }
        }
    }

    for (int64_t i = 0; i < static_cast<int64_t>(img.size()); ++i)
      s.image[i] = std::clamp(img[static_cast<size_t>(i)] +
                                  0.02f * static_cast<float>(rng.uniform() - 0.5),
                              0.0f, 1.0f);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path);
  const uint32_t n = static_cast<uint32_t>(ds.samples.size());
  const uint32_t H = n > 0 ? static_cast<uint32_t>(ds.height()) : 0;
  const uint32_t W = n > 0 ? static_cast<uint32_t>(ds.width()) : 0;
  const uint32_t C = n > 0 ? static_cast<uint32_t>(ds.channels()) : 1;
  f.write(kMagic, 4);
  io::write_u32(f, kVersion);
  io::write_u32(f, n);
  io::write_u32(f, static_cast<uint32_t>(ds.num_classes));
  io::write_u32(f, H);
  io::write_u32(f, W);
  io::write_u32(f, C);
  io::write_u32(f, kDtypeF32);
  io::write_u32(f, kDtypeU8);
  std::vector<unsigned char> mask_bytes(static_cast<size_t>(H) * W);
  for (const auto& s : ds.samples) {
    if (s.image.dim(1) != static_cast<int>(H) || s.image.dim(2) != static_cast<int>(W) ||
        s.image.dim(0) != static_cast<int>(C))
      throw std::invalid_argument("save_dataset: inhomogeneous sample shapes");
    for (int64_t i = 0; i < s.mask.size(); ++i) {
      const int v = s.mask[i];
      if (v < 0 || v >= ds.num_classes) throw std::out_of_range("save_dataset: label out of range");
      mask_bytes[static_cast<size_t>(i)] = static_cast<unsigned char>(v);
    }
    uint32_t crc = io::crc32(s.id.data(), s.id.size());
    crc = io::crc32(s.image.data(), sizeof(float) * static_cast<size_t>(s.image.size()), crc);
    crc = io::crc32(mask_bytes.data(), mask_bytes.size(), crc);
    io::write_string(f, s.id);
    io::write_bytes(f, s.image.data(), sizeof(float) * static_cast<size_t>(s.image.size()));
    io::write_bytes(f, mask_bytes.data(), mask_bytes.size());
    io::write_u32(f, crc);
  }
  if (!f) throw std::runtime_error("write failure: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DatasetFormatError("cannot open dataset: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw DatasetFormatError("dataset format error: bad magic in " + path);
  try {
    const uint32_t version = io::read_u32(f);
    if (version != kVersion)
      throw DatasetFormatError("dataset format error: unsupported version " +
                               std::to_string(version));
    const uint32_t n = io::read_u32(f);
    const uint32_t K = io::read_u32(f);
    const uint32_t H = io::read_u32(f);
    const uint32_t W = io::read_u32(f);
    const uint32_t C = io::read_u32(f);
    const uint32_t image_dtype = io::read_u32(f);
    const uint32_t mask_dtype = io::read_u32(f);
    if (image_dtype != kDtypeF32 || mask_dtype != kDtypeU8)
      throw DatasetFormatError("dataset format error: unsupported dtype codes");
    Dataset ds;
    ds.num_classes = static_cast<int>(K);
    ds.samples.reserve(n);
    std::vector<unsigned char> mask_bytes(static_cast<size_t>(H) * W);
    for (uint32_t i = 0; i < n; ++i) {
      Sample s;
      s.id = io::read_string(f);
      s.image = Tensor<float>({static_cast<int>(C), static_cast<int>(H), static_cast<int>(W)});
      io::read_bytes(f, s.image.data(), sizeof(float) * static_cast<size_t>(s.image.size()));
      io::read_bytes(f, mask_bytes.data(), mask_bytes.size());
      const uint32_t stored = io::read_u32(f);
      uint32_t crc = io::crc32(s.id.data(), s.id.size());
      crc = io::crc32(s.image.data(), sizeof(float) * static_cast<size_t>(s.image.size()), crc);
      crc = io::crc32(mask_bytes.data(), mask_bytes.size(), crc);
      if (crc != stored)
        throw DatasetFormatError("dataset format error: checksum mismatch in sample " + s.id);
      s.mask = Tensor<int>({static_cast<int>(H), static_cast<int>(W)});
      for (int64_t j = 0; j < s.mask.size(); ++j) {
        const int v = mask_bytes[static_cast<size_t>(j)];
        if (v >= static_cast<int>(K))
          throw DatasetFormatError("dataset format error: label out of range in sample " + s.id);
        s.mask[j] = v;
      }
      ds.samples.push_back(std::move(s));
    }
    return ds;
  } catch (const std::runtime_error& e) {
    if (dynamic_cast<const DatasetFormatError*>(&e)) throw;
    throw DatasetFormatError(std::string("dataset format error: ") + e.what());
  }
}

std::vector<double> class_frequencies(const Dataset& ds) {
  if (ds.samples.empty()) throw std::invalid_argument("class_frequencies: empty dataset");
  std::vector<int64_t> counts(static_cast<size_t>(ds.num_classes), 0);
  int64_t total = 0;
  for (const auto& s : ds.samples) {
    for (int64_t i = 0; i < s.mask.size(); ++i) counts[static_cast<size_t>(s.mask[i])]++;
    total += s.mask.size();
  }
  std::vector<double> freq(counts.size());
  for (size_t k = 0; k < counts.size(); ++k)
    freq[k] = static_cast<double>(counts[k]) / static_cast<double>(total);
  return freq;
}

Tensor<float> stack_images(const Dataset& ds, const std::vector<int>& indices) {
  if (indices.empty()) throw std::invalid_argument("stack_images: empty batch");
  const int C = ds.channels(), H = ds.height(), W = ds.width();
  Tensor<float> out({static_cast<int>(indices.size()), C, H, W});
  const int64_t per = static_cast<int64_t>(C) * H * W;
  for (size_t b = 0; b < indices.size(); ++b) {
    const auto& img = ds.samples[static_cast<size_t>(indices[b])].image;
    std::copy(img.data(), img.data() + per, out.data() + static_cast<int64_t>(b) * per);
  }
  return out;
}

Tensor<int> stack_masks(const Dataset& ds, const std::vector<int>& indices) {
  if (indices.empty()) throw std::invalid_argument("stack_masks: empty batch");
  const int H = ds.height(), W = ds.width();
  Tensor<int> out({static_cast<int>(indices.size()), H, W});
  const int64_t per = static_cast<int64_t>(H) * W;
  for (size_t b = 0; b < indices.size(); ++b) {
    const auto& m = ds.samples[static_cast<size_t>(indices[b])].mask;
    std::copy(m.data(), m.data() + per, out.data() + static_cast<int64_t>(b) * per);
  }
  return out;
}

}  // namespace condiff::data
