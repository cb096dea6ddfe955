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

#ifndef CONDIFF_ADAPTER_HPP
#define CONDIFF_ADAPTER_HPP

#include "condiff/attention.hpp"

namespace condiff {

enum class FusionMode { kAdditive, kConcat };

inline const char* fusion_mode_name(FusionMode m) {
  return m == FusionMode::kAdditive ? "additive" : "concat";
}

// Pyramid geometry and attention layout of the conditional network.
struct AdapterConfig {
  std::vector<int> stage_dims = {32, 64, 160, 256};
  std::vector<int> stage_strides = {4, 2, 2, 2};
  std::vector<int> reduction_ratios = {8, 4, 2, 1};
  std::vector<int> num_heads = {1, 2, 5, 8};
  std::vector<int> depths = {2, 2, 2, 2};
  int mlp_ratio = 4;
  FusionMode fusion_mode = FusionMode::kAdditive;

  int stages() const { return static_cast<int>(stage_dims.size()); }

  int cumulative_stride() const {
    int s = 1;
    for (int st : stage_strides) s *= st;
    return s;
  }

  std::vector<std::string> validate() const {
    std::vector<std::string> errs;
    const size_t S = stage_dims.size();
    if (S < 2) errs.push_back("adapter: needs at least 2 stages");
    if (stage_strides.size() != S || reduction_ratios.size() != S || num_heads.size() != S ||
        depths.size() != S)
      errs.push_back("adapter: stage_dims/stage_strides/reduction_ratios/num_heads/depths lengths differ");
    for (size_t s = 0; s < S && errs.empty(); ++s) {
      if (stage_dims[s] <= 0) errs.push_back("adapter: stage dim must be positive");
      if (num_heads[s] <= 0 || stage_dims[s] % num_heads[s] != 0)
        errs.push_back("adapter: stage dim " + std::to_string(stage_dims[s]) +
                       " not divisible by heads " + std::to_string(num_heads[s]));
      if (reduction_ratios[s] < 1) errs.push_back("adapter: reduction ratio must be >= 1");
      if (depths[s] < 1) errs.push_back("adapter: depth must be >= 1");
      int st = stage_strides[s];
      if (st < 2 || (st & (st - 1)) != 0)
        errs.push_back("adapter: stage stride must be a power of two >= 2");
      if (s > 0 && stage_dims[s] < stage_dims[s - 1])
        errs.push_back("adapter: stage dims must be non-decreasing");
    }
    return errs;
  }
};

// Multi-scale feature maps {C_1..C_S}, stage s shaped [B, Ch_s, H_s, W_s].
template <typename T>
struct PyramidFeatures {
  std::vector<Tensor<T>> stages;
};

namespace nn {

// Overlapping convolutional patch embedding (kernel 2s-1 > stride s), then
// flatten to tokens and layer-normalize. Records the token grid for later
// reshaping.
template <typename T>
class PatchEmbed : public Module<T> {
 public:
  PatchEmbed(std::string name, int in_ch, int out_ch, int stride, RngStream& rng)
      : stride_(stride),
        conv_(name + ".conv", in_ch, out_ch, 2 * stride - 1, stride, stride - 1,
              Init::kTruncNormal002, rng),
        ln_(name + ".norm", out_ch) {}

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.dim(2) % stride_ != 0 || x.dim(3) % stride_ != 0)
      throw std::invalid_argument("patch_embed: spatial dims not divisible by stride");
    Tensor<T> y = conv_.forward(x);
    grid_h_ = y.dim(2);
    grid_w_ = y.dim(3);
    Tensor<T> tok = map_to_tokens(y);
    Tensor<T> out = ln_.forward(tok);
    return out;
  }

  Tensor<T> backward(const Tensor<T>& dtok) {
    Tensor<T> d = ln_.backward(dtok);
    return conv_.backward(tokens_to_map(d, grid_h_, grid_w_));
  }

  void collect_params(std::vector<Parameter<T>*>& out) override {
    conv_.collect_params(out);
    ln_.collect_params(out);
  }

  int grid_h() const { return grid_h_; }
  int grid_w() const { return grid_w_; }

 private:
  int stride_;
  Conv2d<T> conv_;
  LayerNorm<T> ln_;
  int grid_h_ = 0, grid_w_ = 0;
};

// The fusion operator behind [z (+) c]: additive adds a 1x1 projection of c
// onto z; concat projects the channel concatenation back to z's width. Both
// keep the output shaped like z.
template <typename T>
class Fuse : public Module<T> {
 public:
  Fuse(std::string name, FusionMode mode, int z_ch, int c_ch, RngStream& rng)
      : mode_(mode),
        z_ch_(z_ch),
        c_ch_(c_ch),
        proj_(name + ".proj", mode == FusionMode::kAdditive ? c_ch : z_ch + c_ch, z_ch, 1, 1, 0,
              Init::kTruncNormal002, rng) {}

  Tensor<T> forward(const Tensor<T>& z, const Tensor<T>& c) {
    if (z.dim(0) != c.dim(0) || z.dim(2) != c.dim(2) || z.dim(3) != c.dim(3))
      throw std::invalid_argument("fuse: spatial mismatch between z and c");
    if (mode_ == FusionMode::kAdditive) {
      Tensor<T> y = proj_.forward(c);
      y += z;
      return y;
    }
    return proj_.forward(concat_channels(z, c));
  }

  // returns dz; dc written through the out-param
  Tensor<T> backward(const Tensor<T>& dy, Tensor<T>& dc) {
    if (mode_ == FusionMode::kAdditive) {
      dc = proj_.backward(dy);
      return dy;
    }
    Tensor<T> dcat = proj_.backward(dy);
    Tensor<T> dz;
    split_channels(dcat, dz, dc, z_ch_, c_ch_);
    return dz;
  }

  void collect_params(std::vector<Parameter<T>*>& out) override { proj_.collect_params(out); }

  // Test hook: identity 1x1 projection (additive mode, square channels).
  void set_identity_projection() {
    auto ps = this->params();
    Tensor<T>& w = ps[0]->value;
    w.zero();
    for (int c = 0; c < z_ch_; ++c) w.at4(c, c % w.dim(1), 0, 0) = T(1);
    ps[1]->value.zero();
  }

  FusionMode mode() const { return mode_; }

 private:
  FusionMode mode_;
  int z_ch_, c_ch_;
  Conv2d<T> proj_;
};

}  // namespace nn

// The conditional network E_PVT(I, x_t, t): hierarchical patch embedding with
// spatial-reduction attention blocks. The noised mask enters once, at stage 1,
// through its own patch embedding whose final linear map starts at zero; a
// timestep embedding is broadcast over the stage-1 tokens.
template <typename T>
class PvtAdapter : public nn::Module<T> {
 public:
  PvtAdapter(const AdapterConfig& cfg, int image_channels, int num_classes, int time_dim,
             RngStream& rng)
      : cfg_(cfg) {
    auto errs = cfg.validate();
    if (!errs.empty()) throw std::invalid_argument("adapter config: " + errs.front());
    const int S = cfg.stages();
    patch_img_ = std::make_unique<nn::PatchEmbed<T>>("adapter.stage1.patch_img", image_channels,
                                                     cfg.stage_dims[0], cfg.stage_strides[0], rng);
    patch_xt_ = std::make_unique<nn::PatchEmbed<T>>("adapter.stage1.patch_xt", num_classes,
                                                    cfg.stage_dims[0], cfg.stage_strides[0], rng);
    xt_out_ = std::make_unique<nn::Linear<T>>("adapter.stage1.xt_out", cfg.stage_dims[0],
                                              cfg.stage_dims[0], nn::Init::kZero, rng);
    time_fc_ = std::make_unique<nn::Linear<T>>("adapter.stage1.time", time_dim, cfg.stage_dims[0],
                                               nn::Init::kTruncNormal002, rng);
    for (int s = 1; s < S; ++s)
      patch_down_.push_back(std::make_unique<nn::PatchEmbed<T>>(
          "adapter.stage" + std::to_string(s + 1) + ".patch", cfg.stage_dims[s - 1],
          cfg.stage_dims[s], cfg.stage_strides[s], rng));
    blocks_.resize(S);
    for (int s = 0; s < S; ++s) {
      for (int d = 0; d < cfg.depths[s]; ++d)
        blocks_[s].push_back(std::make_unique<nn::TransformerBlock<T>>(
            "adapter.stage" + std::to_string(s + 1) + ".block" + std::to_string(d),
            cfg.stage_dims[s], cfg.num_heads[s], cfg.reduction_ratios[s], cfg.mlp_ratio, rng));
      norms_.push_back(std::make_unique<nn::LayerNorm<T>>(
          "adapter.stage" + std::to_string(s + 1) + ".norm", cfg.stage_dims[s]));
    }
  }

  // image: [B, C_img, H, W]; x_t: [B, K, H, W]; temb: [B, time_dim]
  PyramidFeatures<T> forward(const Tensor<T>& image, const Tensor<T>& x_t, const Tensor<T>& temb) {
    if (image.dim(0) != x_t.dim(0) || image.dim(2) != x_t.dim(2) || image.dim(3) != x_t.dim(3))
      throw std::invalid_argument("adapter: image and x_t spatial dims differ");
    const int S = cfg_.stages();
    grids_.assign(S, {0, 0});
    PyramidFeatures<T> pyr;
    pyr.stages.reserve(S);

    // stage 1: image embedding + x_t embedding + broadcast timestep token
    Tensor<T> tok = patch_img_->forward(image);
    const int B = image.dim(0);
    const int H1 = patch_img_->grid_h(), W1 = patch_img_->grid_w();
    const int N1 = H1 * W1, C1 = cfg_.stage_dims[0];
    tok.reshape({B, N1, C1});
    {
      Tensor<T> xt_tok = xt_out_->forward(patch_xt_->forward(x_t));
      xt_tok.reshape({B, N1, C1});
      tok += xt_tok;
      ttok_in_rows_ = B;
      Tensor<T> ttok = time_fc_->forward(temb);  // [B, C1]
      for (int b = 0; b < B; ++b)
        for (int n = 0; n < N1; ++n)
          for (int c = 0; c < C1; ++c) tok.at3(b, n, c) += ttok[static_cast<int64_t>(b) * C1 + c];
    }
    grids_[0] = {H1, W1};
    for (auto& blk : blocks_[0]) tok = blk->forward(tok, H1, W1);
    tok = norms_[0]->forward(tok);
    pyr.stages.push_back(nn::tokens_to_map(tok, H1, W1));

    for (int s = 1; s < S; ++s) {
      Tensor<T> t2 = patch_down_[s - 1]->forward(pyr.stages.back());
      const int Hs = patch_down_[s - 1]->grid_h(), Ws = patch_down_[s - 1]->grid_w();
      t2.reshape({B, Hs * Ws, cfg_.stage_dims[s]});
      grids_[s] = {Hs, Ws};
      for (auto& blk : blocks_[s]) t2 = blk->forward(t2, Hs, Ws);
      t2 = norms_[s]->forward(t2);
      pyr.stages.push_back(nn::tokens_to_map(t2, Hs, Ws));
    }
    return pyr;
  }

  // Accumulates parameter gradients from per-stage map gradients. Gradients
  // w.r.t. image and x_t are computed but not returned (training never needs
  // them).
  void backward(const std::vector<Tensor<T>>& dstages) {
    const int S = cfg_.stages();
    Tensor<T> carry;  // gradient from stage s+1 into stage s's output map (token layout)
    for (int s = S - 1; s >= 1; --s) {
      Tensor<T> d = nn::map_to_tokens(dstages[s]);
      if (s < S - 1) d += carry;
      d = norms_[s]->backward(d);
      for (auto it = blocks_[s].rbegin(); it != blocks_[s].rend(); ++it) d = (*it)->backward(d);
      Tensor<T> dprev_map = patch_down_[s - 1]->backward(d);
      carry = nn::map_to_tokens(dprev_map);
    }
    Tensor<T> d = nn::map_to_tokens(dstages[0]);
    if (S > 1) d += carry;
    d = norms_[0]->backward(d);
    for (auto it = blocks_[0].rbegin(); it != blocks_[0].rend(); ++it) d = (*it)->backward(d);
    // stage-1 joins: image tokens + x_t tokens + broadcast time token
    const int B = ttok_in_rows_, C1 = cfg_.stage_dims[0];
    const int N1 = d.dim(1);
    Tensor<T> dttok({B, C1});
    for (int b = 0; b < B; ++b)
      for (int n = 0; n < N1; ++n)
        for (int c = 0; c < C1; ++c) dttok[static_cast<int64_t>(b) * C1 + c] += d.at3(b, n, c);
    time_fc_->backward(dttok);
    patch_xt_->backward(xt_out_->backward(d));
    patch_img_->backward(d);
  }

  void collect_params(std::vector<nn::Parameter<T>*>& out) override {
    patch_img_->collect_params(out);
    patch_xt_->collect_params(out);
    xt_out_->collect_params(out);
    time_fc_->collect_params(out);
    const int S = cfg_.stages();
    for (int s = 0; s < S; ++s) {
      if (s > 0) patch_down_[s - 1]->collect_params(out);
      for (auto& blk : blocks_[s]) blk->collect_params(out);
      norms_[s]->collect_params(out);
    }
  }

  const AdapterConfig& config() const { return cfg_; }
  const std::vector<std::pair<int, int>>& grids() const { return grids_; }
  std::vector<std::vector<std::unique_ptr<nn::TransformerBlock<T>>>>& stage_blocks() {
    return blocks_;
  }

 private:
  AdapterConfig cfg_;
  std::unique_ptr<nn::PatchEmbed<T>> patch_img_, patch_xt_;
  std::unique_ptr<nn::Linear<T>> xt_out_, time_fc_;
  std::vector<std::unique_ptr<nn::PatchEmbed<T>>> patch_down_;
  std::vector<std::vector<std::unique_ptr<nn::TransformerBlock<T>>>> blocks_;
  std::vector<std::unique_ptr<nn::LayerNorm<T>>> norms_;
  std::vector<std::pair<int, int>> grids_;
  int ttok_in_rows_ = 0;
};

}  // namespace condiff

#endif  // CONDIFF_ADAPTER_HPP
