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

#ifndef CONDIFF_ATTENTION_HPP
#define CONDIFF_ATTENTION_HPP

#include "condiff/nn.hpp"

namespace condiff::nn {

// R(.), the key/value spatial reduction: groups the token grid into r x r
// patches (stride r) and projects each concatenated group back to C channels.
// N tokens become N / r^2.
template <typename T>
class SpatialReduction : public Module<T> {
 public:
  SpatialReduction(std::string name, int channels, int ratio, RngStream& rng)
      : c_(channels),
        r_(ratio),
        proj_(name + ".proj", ratio * ratio * channels, channels, Init::kTruncNormal002, rng) {}

  // tokens: [B, N, C], N = H*W -> [B, N/r^2, C]
  Tensor<T> forward(const Tensor<T>& tokens, int H, int W) {
    if (H % r_ != 0 || W % r_ != 0)
      throw std::invalid_argument("SpatialReduction: r must divide grid dims");
    B_ = tokens.dim(0);
    H_ = H;
    W_ = W;
    const int Hr = H / r_, Wr = W / r_, M = Hr * Wr, G = r_ * r_ * c_;
    Tensor<T> gathered({B_, M, G});
    for (int b = 0; b < B_; ++b)
      for (int gy = 0; gy < Hr; ++gy)
        for (int gx = 0; gx < Wr; ++gx) {
          T* dst = &gathered.at3(b, gy * Wr + gx, 0);
          for (int iy = 0; iy < r_; ++iy)
            for (int ix = 0; ix < r_; ++ix) {
              const int n = (gy * r_ + iy) * W + (gx * r_ + ix);
              const T* src = &tokens.at3(b, n, 0);
              std::copy(src, src + c_, dst);
              dst += c_;
            }
        }
    Tensor<T> out = proj_.forward(gathered);
    out.reshape({B_, M, c_});
    return out;
  }

  Tensor<T> backward(const Tensor<T>& dout) {
    Tensor<T> dgathered = proj_.backward(dout);
    const int Hr = H_ / r_, Wr = W_ / r_;
    Tensor<T> dtokens({B_, H_ * W_, c_});
    for (int b = 0; b < B_; ++b)
      for (int gy = 0; gy < Hr; ++gy)
        for (int gx = 0; gx < Wr; ++gx) {
          const T* src = &dgathered.at3(b, gy * Wr + gx, 0);
          for (int iy = 0; iy < r_; ++iy)
            for (int ix = 0; ix < r_; ++ix) {
              const int n = (gy * r_ + iy) * W_ + (gx * r_ + ix);
              T* dst = &dtokens.at3(b, n, 0);
              std::copy(src, src + c_, dst);
              src += c_;
            }
        }
    return dtokens;
  }

  void collect_params(std::vector<Parameter<T>*>& out) override { proj_.collect_params(out); }

 private:
  int c_, r_;
  Linear<T> proj_;
  int B_ = 0, H_ = 0, W_ = 0;
};

// Multi-head spatial-reduction attention. Queries come from all N tokens;
// keys/values from the reduced grid (identity at r = 1, where this is exactly
// dense multi-head self-attention). Scores use the 1/sqrt(d) scale.
template <typename T>
class MultiHeadSRAttention : public Module<T> {
 public:
  MultiHeadSRAttention(std::string name, int channels, int heads, int ratio, RngStream& rng)
      : c_(channels),
        heads_(heads),
        r_(ratio),
        wq_(name + ".q", channels, channels, Init::kTruncNormal002, rng),
        wk_(name + ".k", channels, channels, Init::kTruncNormal002, rng),
        wv_(name + ".v", channels, channels, Init::kTruncNormal002, rng),
        wo_(name + ".out", channels, channels, Init::kTruncNormal002, rng) {
    if (channels % heads != 0)
      throw std::invalid_argument("attention: channels must be divisible by heads");
    if (ratio < 1) throw std::invalid_argument("attention: reduction ratio must be >= 1");
    if (ratio > 1) sr_ = std::make_unique<SpatialReduction<T>>(name + ".sr", channels, ratio, rng);
  }

  // tokens: [B, N, C], N = H*W
  Tensor<T> forward(const Tensor<T>& tokens, int H, int W) {
    const int B = tokens.dim(0), N = tokens.dim(1);
    if (N != H * W) throw std::invalid_argument("attention: token count != H*W");
    const int d = c_ / heads_;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));

    q_ = wq_.forward(tokens);
    kv_src_ = (r_ > 1) ? sr_->forward(tokens, H, W) : tokens;
    const int M = (r_ > 1) ? kv_src_.dim(1) : N;
    k_ = wk_.forward(kv_src_);
    v_ = wv_.forward(kv_src_);
    attn_ = Tensor<T>({B, heads_, N, M});
    scores_shape_ = {N, M};

    Tensor<T> ctx({B, N, c_});
    for (int b = 0; b < B; ++b) {
      auto qb = as_matrix(q_, N, c_, static_cast<int64_t>(b) * N * c_);
      auto kb = as_matrix(k_, M, c_, static_cast<int64_t>(b) * M * c_);
      auto vb = as_matrix(v_, M, c_, static_cast<int64_t>(b) * M * c_);
      auto cb = as_matrix(ctx, N, c_, static_cast<int64_t>(b) * N * c_);
      for (int h = 0; h < heads_; ++h) {
        auto ab = as_matrix(attn_, N, M, (static_cast<int64_t>(b) * heads_ + h) * N * M);
        ab.noalias() = qb.middleCols(h * d, d) * kb.middleCols(h * d, d).transpose() * scale;
        softmax_rows(ab.data(), ab.data(), N, M);
        cb.middleCols(h * d, d).noalias() = ab * vb.middleCols(h * d, d);
      }
    }
    return wo_.forward(ctx);
  }

  Tensor<T> backward(const Tensor<T>& dout) {
    const int B = attn_.dim(0), N = attn_.dim(2), M = attn_.dim(3);
    const int d = c_ / heads_;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));

    Tensor<T> dctx = wo_.backward(dout);
    Tensor<T> dq({B, N, c_}), dk({B, M, c_}), dv({B, M, c_});
    RowMat<T> da(N, M), ds(N, M);
    for (int b = 0; b < B; ++b) {
      auto qb = as_matrix(q_, N, c_, static_cast<int64_t>(b) * N * c_);
      auto kb = as_matrix(k_, M, c_, static_cast<int64_t>(b) * M * c_);
      auto vb = as_matrix(v_, M, c_, static_cast<int64_t>(b) * M * c_);
      auto dcb = as_matrix(dctx, N, c_, static_cast<int64_t>(b) * N * c_);
      auto dqb = as_matrix(dq, N, c_, static_cast<int64_t>(b) * N * c_);
      auto dkb = as_matrix(dk, M, c_, static_cast<int64_t>(b) * M * c_);
      auto dvb = as_matrix(dv, M, c_, static_cast<int64_t>(b) * M * c_);
      for (int h = 0; h < heads_; ++h) {
        auto ab = as_matrix(attn_, N, M, (static_cast<int64_t>(b) * heads_ + h) * N * M);
        da.noalias() = dcb.middleCols(h * d, d) * vb.middleCols(h * d, d).transpose();
        dvb.middleCols(h * d, d).noalias() = ab.transpose() * dcb.middleCols(h * d, d);
        // softmax backward: ds = a .* (da - rowsum(da .* a))
        for (int n = 0; n < N; ++n) {
          const T dot = da.row(n).cwiseProduct(ab.row(n)).sum();
          ds.row(n) = ab.row(n).cwiseProduct((da.row(n).array() - dot).matrix());
        }
        ds *= scale;
        dqb.middleCols(h * d, d).noalias() = ds * kb.middleCols(h * d, d);
        dkb.middleCols(h * d, d).noalias() = ds.transpose() * qb.middleCols(h * d, d);
      }
    }

    Tensor<T> dtokens = wq_.backward(dq);
    Tensor<T> dkv = wk_.backward(dk);
    dkv += wv_.backward(dv);
    if (r_ > 1) {
      dtokens += sr_->backward(dkv);
    } else {
      dtokens += dkv;
    }
    return dtokens;
  }

  void collect_params(std::vector<Parameter<T>*>& out) override {
    wq_.collect_params(out);
    wk_.collect_params(out);
    wv_.collect_params(out);
    wo_.collect_params(out);
    if (sr_) sr_->collect_params(out);
  }

  // Shape of the materialized attention-weight matrix from the last forward:
  // (queries N, keys N/r^2).
  std::pair<int, int> scores_shape() const { return scores_shape_; }
  int ratio() const { return r_; }

 private:
  int c_, heads_, r_;
  Linear<T> wq_, wk_, wv_, wo_;
  std::unique_ptr<SpatialReduction<T>> sr_;
  Tensor<T> q_, k_, v_, kv_src_, attn_;
  std::pair<int, int> scores_shape_{0, 0};
};

// fc1 -> GELU -> fc2
template <typename T>
class Mlp : public Module<T> {
 public:
  Mlp(std::string name, int channels, int hidden, RngStream& rng)
      : fc1_(name + ".fc1", channels, hidden, Init::kTruncNormal002, rng),
        fc2_(name + ".fc2", hidden, channels, Init::kTruncNormal002, rng) {}

  Tensor<T> forward(const Tensor<T>& x) {
    auto shape = x.shape();
    Tensor<T> y = fc2_.forward(act_.forward(fc1_.forward(x)));
    y.reshape(shape);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    auto shape = dy.shape();
    Tensor<T> dx = fc1_.backward(act_.backward(fc2_.backward(dy)));
    dx.reshape(shape);
    return dx;
  }
  void collect_params(std::vector<Parameter<T>*>& out) override {
    fc1_.collect_params(out);
    fc2_.collect_params(out);
  }

 private:
  Linear<T> fc1_, fc2_;
  GELU<T> act_;
};

// Pre-norm transformer block: x + SRA(LN(x)), then h + MLP(LN(h)).
template <typename T>
class TransformerBlock : public Module<T> {
 public:
  TransformerBlock(std::string name, int channels, int heads, int ratio, int mlp_ratio,
                   RngStream& rng)
      : ln1_(name + ".norm1", channels),
        ln2_(name + ".norm2", channels),
        attn_(name + ".attn", channels, heads, ratio, rng),
        mlp_(name + ".mlp", channels, channels * mlp_ratio, rng) {}

  Tensor<T> forward(const Tensor<T>& x, int H, int W) {
    Tensor<T> h = attn_.forward(ln1_.forward(x), H, W);
    h.reshape(x.shape());
    h += x;
    Tensor<T> y = mlp_.forward(ln2_.forward(h));
    y += h;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dh = ln2_.backward(mlp_.backward(dy));
    dh += dy;
    Tensor<T> dx = ln1_.backward(attn_.backward(dh));
    dx += dh;
    return dx;
  }

  void collect_params(std::vector<Parameter<T>*>& out) override {
    ln1_.collect_params(out);
    attn_.collect_params(out);
    ln2_.collect_params(out);
    mlp_.collect_params(out);
  }

  MultiHeadSRAttention<T>& attention() { return attn_; }

 private:
  LayerNorm<T> ln1_, ln2_;
  MultiHeadSRAttention<T> attn_;
  Mlp<T> mlp_;
};

}  // namespace condiff::nn

#endif  // CONDIFF_ATTENTION_HPP
