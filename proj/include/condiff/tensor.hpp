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

#ifndef CONDIFF_TENSOR_HPP
#define CONDIFF_TENSOR_HPP

#include <Eigen/Dense>

#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace condiff {

// Dense row-major tensor with a small explicit shape. Layout is contiguous
// C-order; rank-4 tensors follow the [batch, channels, height, width]
// convention and rank-3 token tensors follow [batch, tokens, channels].
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(numel(shape_), T(0));
  }

  Tensor(std::vector<int> shape, T fill_value) : shape_(std::move(shape)) {
    data_.assign(numel(shape_), fill_value);
  }

  static int64_t numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
      if (d < 0) throw std::invalid_argument("negative tensor dim");
      n *= d;
    }
    return n;
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // [B, C, H, W] indexing
  T& at4(int b, int c, int y, int x) {
    return data_[((static_cast<int64_t>(b) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }
  const T& at4(int b, int c, int y, int x) const {
    return data_[((static_cast<int64_t>(b) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }

  // [B, N, C] indexing
  T& at3(int b, int n, int c) {
    return data_[(static_cast<int64_t>(b) * shape_[1] + n) * shape_[2] + c];
  }
  const T& at3(int b, int n, int c) const {
    return data_[(static_cast<int64_t>(b) * shape_[1] + n) * shape_[2] + c];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T(0)); }

  void reshape(std::vector<int> new_shape) {
    if (numel(new_shape) != size()) throw std::invalid_argument("reshape size mismatch");
    shape_ = std::move(new_shape);
  }

  Tensor reshaped(std::vector<int> new_shape) const {
    Tensor t = *this;
    t.reshape(std::move(new_shape));
    return t;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  Tensor& operator+=(const Tensor& o) {
    assert(same_shape(o));
    for (int64_t i = 0; i < size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  Tensor& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  bool all_finite() const {
    for (const auto& v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

 private:
  std::vector<int> shape_;
  std::vector<T> data_;
};

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// Views a contiguous slice of a tensor as a rows x cols row-major matrix.
template <typename T>
MatMap<T> as_matrix(Tensor<T>& t, int64_t rows, int64_t cols, int64_t offset = 0) {
  assert(offset + rows * cols <= t.size());
  return MatMap<T>(t.data() + offset, rows, cols);
}

template <typename T>
ConstMatMap<T> as_matrix(const Tensor<T>& t, int64_t rows, int64_t cols, int64_t offset = 0) {
  assert(offset + rows * cols <= t.size());
  return ConstMatMap<T>(t.data() + offset, rows, cols);
}

// Deterministic random stream. Gaussian draws use Box-Muller so the byte
// stream is pinned by mt19937_64 alone, independent of the C++ runtime's
// distribution internals.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : gen_(seed), seed_mix_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // uniform integer in [lo, hi] inclusive, rejection-free modulo bias is
  // negligible for the small ranges used here
  int uniform_int(int lo, int hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(gen_() % span);
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Derives an independent child stream (splitmix64 over seed ^ salt).
  RngStream fork(uint64_t salt) const {
    uint64_t z = seed_mix_ ^ (salt + 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return RngStream(z ^ (z >> 31));
  }

  void reseed(uint64_t seed) {
    gen_.seed(seed);
    seed_mix_ = seed;
    has_spare_ = false;
  }

 private:
  std::mt19937_64 gen_;
  uint64_t seed_mix_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

template <typename T>
void fill_normal(Tensor<T>& t, RngStream& rng, double mean = 0.0, double std = 1.0) {
  for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(mean + std * rng.normal());
}

// Truncated normal: resample draws outside +-2 std.
template <typename T>
void fill_trunc_normal(Tensor<T>& t, RngStream& rng, double std) {
  for (int64_t i = 0; i < t.size(); ++i) {
    double v = rng.normal();
    while (std::abs(v) > 2.0) v = rng.normal();
    t[i] = static_cast<T>(v * std);
  }
}

template <typename T>
Tensor<T> random_normal(const std::vector<int>& shape, RngStream& rng) {
  Tensor<T> t(shape);
  fill_normal(t, rng);
  return t;
}

}  // namespace condiff

#endif  // CONDIFF_TENSOR_HPP
