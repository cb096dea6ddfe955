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

#ifndef CONDIFF_NN_HPP
#define CONDIFF_NN_HPP

#include "condiff/tensor.hpp"

#include <memory>
#include <string>
#include <vector>

namespace condiff::nn {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, std::vector<int> shape)
      : name(std::move(n)), value(shape), grad(shape) {}
};

// All layers cache whatever forward state their backward needs; backward
// accumulates into parameter grads (+=) and returns the input gradient.
template <typename T>
class Module {
 public:
  virtual ~Module() = default;
  virtual void collect_params(std::vector<Parameter<T>*>& out) = 0;

  std::vector<Parameter<T>*> params() {
    std::vector<Parameter<T>*> out;
    collect_params(out);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->grad.zero();
  }
};

enum class Init { kTruncNormal002, kHe, kZero };

template <typename T>
void init_weight(Tensor<T>& w, Init init, int fan_in, RngStream& rng) {
  switch (init) {
    case Init::kTruncNormal002:
      fill_trunc_normal(w, rng, 0.02);
      break;
    case Init::kHe:
      fill_trunc_normal(w, rng, std::sqrt(2.0 / std::max(1, fan_in)));
      break;
    case Init::kZero:
      w.zero();
      break;
  }
}

// y = x W^T + b over the last axis; x is any [rows, in] flattening.
template <typename T>
class Linear : public Module<T> {
 public:
  Linear(std::string name, int in, int out, Init init, RngStream& rng)
      : in_(in), out_(out), w_(name + ".weight", {out, in}), b_(name + ".bias", {out}) {
    init_weight(w_.value, init, in, rng);
  }

  // x: [rows, in] -> [rows, out]
  Tensor<T> forward(const Tensor<T>& x) {
    x_ = x;
    int64_t rows = x.size() / in_;
    Tensor<T> y({static_cast<int>(rows), out_});
    auto xm = as_matrix(x, rows, in_);
    auto wm = as_matrix(w_.value, out_, in_);
    auto ym = as_matrix(y, rows, out_);
    ym.noalias() = xm * wm.transpose();
    ym.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b_.value.data(), out_);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    int64_t rows = dy.size() / out_;
    Tensor<T> dx(x_.shape());
    auto dym = as_matrix(dy, rows, out_);
    auto xm = as_matrix(x_, rows, in_);
    auto wm = as_matrix(w_.value, out_, in_);
    as_matrix(dx, rows, in_).noalias() = dym * wm;
    as_matrix(w_.grad, out_, in_).noalias() += dym.transpose() * xm;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(b_.grad.data(), out_) += dym.colwise().sum();
    return dx;
  }

  void collect_params(std::vector<Parameter<T>*>& out) override {
    out.push_back(&w_);
    out.push_back(&b_);
  }

  int in() const { return in_; }
  int out() const { return out_; }
  Parameter<T>& weight() { return w_; }
  Parameter<T>& bias() { return b_; }

 private:
  int in_, out_;
  Parameter<T> w_, b_;
  Tensor<T> x_;
};

// 2D convolution via im2col + GEMM, per sample.
template <typename T>
class Conv2d : public Module<T> {
 public:
  Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad, Init init,
         RngStream& rng)
      : in_ch_(in_ch),
        out_ch_(out_ch),
        k_(kernel),
        stride_(stride),
        pad_(pad),
        w_(name + ".weight", {out_ch, in_ch, kernel, kernel}),
        b_(name + ".bias", {out_ch}) {
    init_weight(w_.value, init, in_ch * kernel * kernel, rng);
  }

  static int out_dim(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }

  // x: [B, Cin, H, W] -> [B, Cout, Ho, Wo]
  Tensor<T> forward(const Tensor<T>& x) {
    x_ = x;
    const int B = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int Ho = out_dim(H, k_, stride_, pad_), Wo = out_dim(W, k_, stride_, pad_);
    const int N = Ho * Wo, K = in_ch_ * k_ * k_;
    Tensor<T> y({B, out_ch_, Ho, Wo});
    Tensor<T> cols({N, K});
    auto wm = as_matrix(w_.value, out_ch_, K);
    RowMat<T> ys(N, out_ch_);
    for (int b = 0; b < B; ++b) {
      im2col(x, b, cols, Ho, Wo);
      ys.noalias() = as_matrix(cols, N, K) * wm.transpose();
      ys.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b_.value.data(), out_ch_);
      // scatter [N, Cout] -> [Cout, Ho, Wo]
      for (int c = 0; c < out_ch_; ++c) {
        T* dst = &y.at4(b, c, 0, 0);
        for (int n = 0; n < N; ++n) dst[n] = ys(n, c);
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const int B = x_.dim(0), H = x_.dim(2), W = x_.dim(3);
    const int Ho = dy.dim(2), Wo = dy.dim(3);
    const int N = Ho * Wo, K = in_ch_ * k_ * k_;
    Tensor<T> dx(x_.shape());
    Tensor<T> cols({N, K});
    RowMat<T> dys(N, out_ch_), dcols(N, K);
    auto wm = as_matrix(w_.value, out_ch_, K);
    auto dwm = as_matrix(w_.grad, out_ch_, K);
    for (int b = 0; b < B; ++b) {
      for (int c = 0; c < out_ch_; ++c) {
        const T* src = &dy.at4(b, c, 0, 0);
        for (int n = 0; n < N; ++n) dys(n, c) = src[n];
      }
      im2col(x_, b, cols, Ho, Wo);
      dwm.noalias() += dys.transpose() * as_matrix(cols, N, K);
      Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(b_.grad.data(), out_ch_) +=
          dys.colwise().sum();
      dcols.noalias() = dys * wm;
      col2im(dcols, b, dx, Ho, Wo);
    }
    (void)H;
    (void)W;
    return dx;
  }

  void collect_params(std::vector<Parameter<T>*>& out) override {
    out.push_back(&w_);
    out.push_back(&b_);
  }

  int out_channels() const { return out_ch_; }

 private:
  void im2col(const Tensor<T>& x, int b, Tensor<T>& cols, int Ho, int Wo) const {
    const int H = x.dim(2), W = x.dim(3);
    T* cp = cols.data();
    for (int oy = 0; oy < Ho; ++oy) {
      for (int ox = 0; ox < Wo; ++ox) {
        const int iy0 = oy * stride_ - pad_, ix0 = ox * stride_ - pad_;
        for (int c = 0; c < in_ch_; ++c) {
          const T* xc = &x.at4(b, c, 0, 0);
          for (int ky = 0; ky < k_; ++ky) {
            const int iy = iy0 + ky;
            if (iy < 0 || iy >= H) {
              for (int kx = 0; kx < k_; ++kx) *cp++ = T(0);
              continue;
            }
            const T* row = xc + static_cast<int64_t>(iy) * W;
            for (int kx = 0; kx < k_; ++kx) {
              const int ix = ix0 + kx;
              *cp++ = (ix < 0 || ix >= W) ? T(0) : row[ix];
            }
          }
        }
      }
    }
  }

  void col2im(const RowMat<T>& dcols, int b, Tensor<T>& dx, int Ho, int Wo) const {
    const int H = dx.dim(2), W = dx.dim(3);
    const T* cp = dcols.data();
    for (int oy = 0; oy < Ho; ++oy) {
      for (int ox = 0; ox < Wo; ++ox) {
        const int iy0 = oy * stride_ - pad_, ix0 = ox * stride_ - pad_;
        for (int c = 0; c < in_ch_; ++c) {
          T* xc = &dx.at4(b, c, 0, 0);
          for (int ky = 0; ky < k_; ++ky) {
            const int iy = iy0 + ky;
            if (iy < 0 || iy >= H) {
              cp += k_;
              continue;
            }
            T* row = xc + static_cast<int64_t>(iy) * W;
            for (int kx = 0; kx < k_; ++kx) {
              const int ix = ix0 + kx;
              if (ix >= 0 && ix < W) row[ix] += *cp;
              ++cp;
            }
          }
        }
      }
    }
  }

  int in_ch_, out_ch_, k_, stride_, pad_;
  Parameter<T> w_, b_;
  Tensor<T> x_;
};

// Group normalization over [B, C, H, W] with per-channel affine.
template <typename T>
class GroupNorm : public Module<T> {
 public:
  GroupNorm(std::string name, int channels, int groups, double eps = 1e-5)
      : c_(channels),
        g_(groups),
        eps_(eps),
        gamma_(name + ".weight", {channels}),
        beta_(name + ".bias", {channels}) {
    if (channels % groups != 0) throw std::invalid_argument("GroupNorm: channels % groups != 0");
    gamma_.value.fill(T(1));
  }

  Tensor<T> forward(const Tensor<T>& x) {
    const int B = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int cg = c_ / g_;
    const int64_t gsize = static_cast<int64_t>(cg) * H * W;
    xhat_ = Tensor<T>(x.shape());
    invstd_ = Tensor<T>({B, g_});
    Tensor<T> y(x.shape());
    for (int b = 0; b < B; ++b) {
      for (int g = 0; g < g_; ++g) {
        const T* xs = &x.at4(b, g * cg, 0, 0);
        double mean = 0;
        for (int64_t i = 0; i < gsize; ++i) mean += xs[i];
        mean /= static_cast<double>(gsize);
        double var = 0;
        for (int64_t i = 0; i < gsize; ++i) {
          double d = xs[i] - mean;
          var += d * d;
        }
        var /= static_cast<double>(gsize);
        T inv = static_cast<T>(1.0 / std::sqrt(var + eps_));
        invstd_[static_cast<int64_t>(b) * g_ + g] = inv;
        T* xh = &xhat_.at4(b, g * cg, 0, 0);
        T* ys = &y.at4(b, g * cg, 0, 0);
        for (int cc = 0; cc < cg; ++cc) {
          const T gam = gamma_.value[g * cg + cc], bet = beta_.value[g * cg + cc];
          for (int64_t i = cc * static_cast<int64_t>(H) * W; i < (cc + 1) * static_cast<int64_t>(H) * W; ++i) {
            xh[i] = static_cast<T>((xs[i] - mean) * inv);
            ys[i] = gam * xh[i] + bet;
          }
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const int B = dy.dim(0), H = dy.dim(2), W = dy.dim(3);
    const int cg = c_ / g_;
    const int64_t hw = static_cast<int64_t>(H) * W;
    const int64_t gsize = cg * hw;
    Tensor<T> dx(dy.shape());
    for (int b = 0; b < B; ++b) {
      for (int g = 0; g < g_; ++g) {
        const T* dys = &dy.at4(b, g * cg, 0, 0);
        const T* xh = &xhat_.at4(b, g * cg, 0, 0);
        const T inv = invstd_[static_cast<int64_t>(b) * g_ + g];
        double sum_dyh = 0, sum_dyh_xh = 0;
        for (int cc = 0; cc < cg; ++cc) {
          const T gam = gamma_.value[g * cg + cc];
          double dg = 0, db = 0;
          for (int64_t i = cc * hw; i < (cc + 1) * hw; ++i) {
            const double dyh = static_cast<double>(dys[i]) * gam;
            sum_dyh += dyh;
            sum_dyh_xh += dyh * xh[i];
            dg += static_cast<double>(dys[i]) * xh[i];
            db += dys[i];
          }
          gamma_.grad[g * cg + cc] += static_cast<T>(dg);
          beta_.grad[g * cg + cc] += static_cast<T>(db);
        }
        const double m1 = sum_dyh / static_cast<double>(gsize);
        const double m2 = sum_dyh_xh / static_cast<double>(gsize);
        T* dxs = &dx.at4(b, g * cg, 0, 0);
        for (int cc = 0; cc < cg; ++cc) {
          const T gam = gamma_.value[g * cg + cc];
          for (int64_t i = cc * hw; i < (cc + 1) * hw; ++i) {
            const double dyh = static_cast<double>(dys[i]) * gam;
            dxs[i] = static_cast<T>(inv * (dyh - m1 - xh[i] * m2));
          }
        }
      }
    }
    return dx;
  }

  void collect_params(std::vector<Parameter<T>*>& out) override {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }

 private:
  int c_, g_;
  double eps_;
  Parameter<T> gamma_, beta_;
  Tensor<T> xhat_, invstd_;
};

// Layer normalization over the last axis of any [rows, C] flattening.
template <typename T>
class LayerNorm : public Module<T> {
 public:
  LayerNorm(std::string name, int channels, double eps = 1e-6)
      : c_(channels), eps_(eps), gamma_(name + ".weight", {channels}), beta_(name + ".bias", {channels}) {
    gamma_.value.fill(T(1));
  }

  Tensor<T> forward(const Tensor<T>& x) {
    const int64_t rows = x.size() / c_;
    xhat_ = Tensor<T>(x.shape());
    invstd_ = Tensor<T>({static_cast<int>(rows)});
    Tensor<T> y(x.shape());
    for (int64_t r = 0; r < rows; ++r) {
      const T* xs = x.data() + r * c_;
      double mean = 0;
      for (int i = 0; i < c_; ++i) mean += xs[i];
      mean /= c_;
      double var = 0;
      for (int i = 0; i < c_; ++i) {
        double d = xs[i] - mean;
        var += d * d;
      }
      var /= c_;
      const T inv = static_cast<T>(1.0 / std::sqrt(var + eps_));
      invstd_[r] = inv;
      T* xh = xhat_.data() + r * c_;
      T* ys = y.data() + r * c_;
      for (int i = 0; i < c_; ++i) {
        xh[i] = static_cast<T>((xs[i] - mean) * inv);
        ys[i] = gamma_.value[i] * xh[i] + beta_.value[i];
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const int64_t rows = dy.size() / c_;
    Tensor<T> dx(dy.shape());
    for (int64_t r = 0; r < rows; ++r) {
      const T* dys = dy.data() + r * c_;
      const T* xh = xhat_.data() + r * c_;
      double m1 = 0, m2 = 0;
      for (int i = 0; i < c_; ++i) {
        const double dyh = static_cast<double>(dys[i]) * gamma_.value[i];
        m1 += dyh;
        m2 += dyh * xh[i];
        gamma_.grad[i] += static_cast<T>(static_cast<double>(dys[i]) * xh[i]);
        beta_.grad[i] += dys[i];
      }
      m1 /= c_;
      m2 /= c_;
      T* dxs = dx.data() + r * c_;
      const T inv = invstd_[r];
      for (int i = 0; i < c_; ++i) {
        const double dyh = static_cast<double>(dys[i]) * gamma_.value[i];
        dxs[i] = static_cast<T>(inv * (dyh - m1 - xh[i] * m2));
      }
    }
    return dx;
  }

  void collect_params(std::vector<Parameter<T>*>& out) override {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }

 private:
  int c_;
  double eps_;
  Parameter<T> gamma_, beta_;
  Tensor<T> xhat_, invstd_;
};

// x * sigmoid(x)
template <typename T>
class SiLU : public Module<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    x_ = x;
    Tensor<T> y(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(x[i])));
      y[i] = static_cast<T>(x[i] * s);
    }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.shape());
    for (int64_t i = 0; i < dy.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(x_[i])));
      dx[i] = static_cast<T>(dy[i] * (s * (1.0 + x_[i] * (1.0 - s))));
    }
    return dx;
  }
  void collect_params(std::vector<Parameter<T>*>&) override {}

 private:
  Tensor<T> x_;
};

// Exact erf-based GELU.
template <typename T>
class GELU : public Module<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    x_ = x;
    Tensor<T> y(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) {
      const double v = x[i];
      y[i] = static_cast<T>(0.5 * v * (1.0 + std::erf(v * M_SQRT1_2)));
    }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.shape());
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    for (int64_t i = 0; i < dy.size(); ++i) {
      const double v = x_[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      dx[i] = static_cast<T>(dy[i] * (cdf + v * pdf));
    }
    return dx;
  }
  void collect_params(std::vector<Parameter<T>*>&) override {}

 private:
  Tensor<T> x_;
};

// Nearest-neighbor 2x upsampling.
template <typename T>
class Upsample2x : public Module<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    in_shape_ = x.shape();
    Tensor<T> y({B, C, H * 2, W * 2});
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < H; ++i)
          for (int j = 0; j < W; ++j) {
            const T v = x.at4(b, c, i, j);
            y.at4(b, c, 2 * i, 2 * j) = v;
            y.at4(b, c, 2 * i, 2 * j + 1) = v;
            y.at4(b, c, 2 * i + 1, 2 * j) = v;
            y.at4(b, c, 2 * i + 1, 2 * j + 1) = v;
          }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(in_shape_);
    const int B = dx.dim(0), C = dx.dim(1), H = dx.dim(2), W = dx.dim(3);
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < H; ++i)
          for (int j = 0; j < W; ++j)
            dx.at4(b, c, i, j) = dy.at4(b, c, 2 * i, 2 * j) + dy.at4(b, c, 2 * i, 2 * j + 1) +
                                 dy.at4(b, c, 2 * i + 1, 2 * j) + dy.at4(b, c, 2 * i + 1, 2 * j + 1);
    return dx;
  }
  void collect_params(std::vector<Parameter<T>*>&) override {}

 private:
  std::vector<int> in_shape_;
};

// Channel concat of two [B, C, H, W] maps.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const int B = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
  if (b.dim(0) != B || b.dim(2) != H || b.dim(3) != W)
    throw std::invalid_argument("concat_channels: spatial mismatch");
  Tensor<T> y({B, Ca + Cb, H, W});
  const int64_t hw = static_cast<int64_t>(H) * W;
  for (int n = 0; n < B; ++n) {
    std::copy(a.data() + n * Ca * hw, a.data() + (n + 1) * Ca * hw, y.data() + static_cast<int64_t>(n) * (Ca + Cb) * hw);
    std::copy(b.data() + n * Cb * hw, b.data() + (n + 1) * Cb * hw,
              y.data() + static_cast<int64_t>(n) * (Ca + Cb) * hw + Ca * hw);
  }
  return y;
}

template <typename T>
void split_channels(const Tensor<T>& dy, Tensor<T>& da, Tensor<T>& db, int Ca, int Cb) {
  const int B = dy.dim(0), H = dy.dim(2), W = dy.dim(3);
  da = Tensor<T>({B, Ca, H, W});
  db = Tensor<T>({B, Cb, H, W});
  const int64_t hw = static_cast<int64_t>(H) * W;
  for (int n = 0; n < B; ++n) {
    const T* src = dy.data() + static_cast<int64_t>(n) * (Ca + Cb) * hw;
    std::copy(src, src + Ca * hw, da.data() + n * Ca * hw);
    std::copy(src + Ca * hw, src + (Ca + Cb) * hw, db.data() + n * Cb * hw);
  }
}

// [B, C, H, W] -> [B, H*W, C]
template <typename T>
Tensor<T> map_to_tokens(const Tensor<T>& x) {
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor<T> y({B, H * W, C});
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const T* src = &x.at4(b, c, 0, 0);
      for (int n = 0; n < H * W; ++n) y.at3(b, n, c) = src[n];
    }
  return y;
}

// [B, N, C] -> [B, C, H, W] with N = H*W
template <typename T>
Tensor<T> tokens_to_map(const Tensor<T>& x, int H, int W) {
  const int B = x.dim(0), N = x.dim(1), C = x.dim(2);
  if (N != H * W) throw std::invalid_argument("tokens_to_map: grid mismatch");
  Tensor<T> y({B, C, H, W});
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      T* dst = &y.at4(b, c, 0, 0);
      for (int n = 0; n < N; ++n) dst[n] = x.at3(b, n, c);
    }
  return y;
}

// Row-wise softmax with max subtraction; y and x may alias.
template <typename T>
void softmax_rows(const T* x, T* y, int64_t rows, int cols) {
  for (int64_t r = 0; r < rows; ++r) {
    const T* xs = x + r * cols;
    T* ys = y + r * cols;
    T mx = xs[0];
    for (int i = 1; i < cols; ++i) mx = std::max(mx, xs[i]);
    double sum = 0;
    for (int i = 0; i < cols; ++i) {
      const double e = std::exp(static_cast<double>(xs[i] - mx));
      ys[i] = static_cast<T>(e);
      sum += e;
    }
    const T inv = static_cast<T>(1.0 / sum);
    for (int i = 0; i < cols; ++i) ys[i] *= inv;
  }
}

}  // namespace condiff::nn

#endif  // CONDIFF_NN_HPP
