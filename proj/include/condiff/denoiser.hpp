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

#ifndef CONDIFF_DENOISER_HPP
#define CONDIFF_DENOISER_HPP

#include "condiff/adapter.hpp"

namespace condiff {

// Sinusoidal timestep embedding: first dim/2 entries sin(t * w_k), last dim/2
// entries cos(t * w_k), w_k = 10000^(-2k/dim).
template <typename T>
Tensor<T> timestep_embed(int t, int dim) {
  if (dim % 2 != 0) throw std::invalid_argument("timestep_embed: dim must be even");
  if (t < 0) throw std::invalid_argument("timestep_embed: t must be >= 0");
  Tensor<T> e({dim});
  const int half = dim / 2;
  for (int k = 0; k < half; ++k) {
    const double w = std::pow(10000.0, -2.0 * k / dim);
    e[k] = static_cast<T>(std::sin(t * w));
    e[half + k] = static_cast<T>(std::cos(t * w));
  }
  return e;
}

template <typename T>
Tensor<T> timestep_embed_batch(const std::vector<int>& ts, int dim) {
  Tensor<T> e({static_cast<int>(ts.size()), dim});
  for (size_t b = 0; b < ts.size(); ++b) {
    Tensor<T> one = timestep_embed<T>(ts[b], dim);
    std::copy(one.data(), one.data() + dim, e.data() + b * dim);
  }
  return e;
}

struct DenoiserConfig {
  std::vector<int> channels = {32, 64, 160, 256};  // per scale, aligned to the adapter pyramid
  int time_dim = 128;
  int num_classes = 4;

  std::vector<std::string> validate() const {
    std::vector<std::string> errs;
    if (channels.size() < 2) errs.push_back("denoiser: needs at least 2 scales");
    for (int c : channels)
      if (c <= 0) errs.push_back("denoiser: channel width must be positive");
    if (time_dim <= 0 || time_dim % 2 != 0)
      errs.push_back("denoiser: time_dim must be a positive even integer");
    if (num_classes < 2) errs.push_back("denoiser: num_classes must be >= 2");
    return errs;
  }
};

template <typename T>
struct DenoiserOutput {
  Tensor<T> x0_hat;
  std::vector<Tensor<T>> encoder_features;  // z_t per scale, pre-fusion
};

namespace nn {

inline int norm_groups(int channels) {
  for (int g : {8, 4, 2})
    if (channels % g == 0) return g;
  return 1;
}

// conv-gn-silu, add projected timestep embedding, conv-gn-silu
template <typename T>
class ConvBlock : public Module<T> {
 public:
  ConvBlock(std::string name, int in_ch, int out_ch, int time_dim, RngStream& rng)
      : out_ch_(out_ch),
        conv1_(name + ".conv1", in_ch, out_ch, 3, 1, 1, Init::kHe, rng),
        gn1_(name + ".norm1", out_ch, norm_groups(out_ch)),
        conv2_(name + ".conv2", out_ch, out_ch, 3, 1, 1, Init::kHe, rng),
        gn2_(name + ".norm2", out_ch, norm_groups(out_ch)),
        time_proj_(name + ".time", time_dim, out_ch, Init::kTruncNormal002, rng) {}

  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& temb) {
    Tensor<T> h = act1_.forward(gn1_.forward(conv1_.forward(x)));
    Tensor<T> tv = time_proj_.forward(temb);  // [B, out]
    const int B = h.dim(0), H = h.dim(2), W = h.dim(3);
    const int64_t hw = static_cast<int64_t>(H) * W;
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < out_ch_; ++c) {
        const T v = tv[static_cast<int64_t>(b) * out_ch_ + c];
        T* hs = &h.at4(b, c, 0, 0);
        for (int64_t i = 0; i < hw; ++i) hs[i] += v;
      }
    return act2_.forward(gn2_.forward(conv2_.forward(h)));
  }

  // dtemb accumulates this block's gradient w.r.t. the shared time embedding
  Tensor<T> backward(const Tensor<T>& dy, Tensor<T>& dtemb) {
    Tensor<T> dh = conv2_.backward(gn2_.backward(act2_.backward(dy)));
    const int B = dh.dim(0), H = dh.dim(2), W = dh.dim(3);
    const int64_t hw = static_cast<int64_t>(H) * W;
    Tensor<T> dtv({B, out_ch_});
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < out_ch_; ++c) {
        const T* hs = &dh.at4(b, c, 0, 0);
        double acc = 0;
        for (int64_t i = 0; i < hw; ++i) acc += hs[i];
        dtv[static_cast<int64_t>(b) * out_ch_ + c] = static_cast<T>(acc);
      }
    dtemb += time_proj_.backward(dtv);
    return conv1_.backward(gn1_.backward(act1_.backward(dh)));
  }

  void collect_params(std::vector<Parameter<T>*>& out) override {
    conv1_.collect_params(out);
    gn1_.collect_params(out);
    conv2_.collect_params(out);
    gn2_.collect_params(out);
    time_proj_.collect_params(out);
  }

 private:
  int out_ch_;
  Conv2d<T> conv1_;
  GroupNorm<T> gn1_;
  Conv2d<T> conv2_;
  GroupNorm<T> gn2_;
  Linear<T> time_proj_;
  SiLU<T> act1_, act2_;
};

// upsample-conv-gn-silu, used for the stride-recovery tail
template <typename T>
class UpConvBlock : public Module<T> {
 public:
  UpConvBlock(std::string name, int in_ch, int out_ch, RngStream& rng)
      : conv_(name + ".conv", in_ch, out_ch, 3, 1, 1, Init::kHe, rng),
        gn_(name + ".norm", out_ch, norm_groups(out_ch)) {}

  Tensor<T> forward(const Tensor<T>& x) {
    return act_.forward(gn_.forward(conv_.forward(up_.forward(x))));
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    return up_.backward(conv_.backward(gn_.backward(act_.backward(dy))));
  }
  void collect_params(std::vector<Parameter<T>*>& out) override {
    conv_.collect_params(out);
    gn_.collect_params(out);
  }

 private:
  Upsample2x<T> up_;
  Conv2d<T> conv_;
  GroupNorm<T> gn_;
  SiLU<T> act_;
};

}  // namespace nn

// UNet-style denoiser: encoder over the noisy mask with per-scale fusion of
// adapter features, decoder with skip connections from the fused maps,
// predicting the clean mask directly.
template <typename T>
class UnetDenoiser : public nn::Module<T> {
 public:
  UnetDenoiser(const DenoiserConfig& cfg, const std::vector<int>& strides, FusionMode fusion,
               const std::vector<int>& adapter_dims, RngStream& rng)
      : cfg_(cfg), strides_(strides) {
    auto errs = cfg.validate();
    if (!errs.empty()) throw std::invalid_argument("denoiser config: " + errs.front());
    if (strides.size() != cfg.channels.size() || adapter_dims.size() != cfg.channels.size())
      throw std::invalid_argument("denoiser: scale count must match the adapter pyramid");
    const int S = static_cast<int>(cfg.channels.size());
    const auto& ch = cfg.channels;

    time_fc_ = std::make_unique<nn::Linear<T>>("denoiser.time", cfg.time_dim, cfg.time_dim,
                                               nn::Init::kTruncNormal002, rng);
    stem_ = std::make_unique<nn::Conv2d<T>>("denoiser.stem", cfg.num_classes, ch[0],
                                            2 * strides[0] - 1, strides[0], strides[0] - 1,
                                            nn::Init::kHe, rng);
    for (int s = 0; s < S; ++s) {
      enc_blocks_.push_back(std::make_unique<nn::ConvBlock<T>>(
          "denoiser.enc" + std::to_string(s + 1), ch[s], ch[s], cfg.time_dim, rng));
      fuses_.push_back(std::make_unique<nn::Fuse<T>>("denoiser.fuse" + std::to_string(s + 1),
                                                     fusion, ch[s], adapter_dims[s], rng));
      if (s > 0)
        downs_.push_back(std::make_unique<nn::Conv2d<T>>("denoiser.down" + std::to_string(s + 1),
                                                         ch[s - 1], ch[s], 3, 2, 1, nn::Init::kHe,
                                                         rng));
    }
    mid_ = std::make_unique<nn::ConvBlock<T>>("denoiser.mid", ch[S - 1], ch[S - 1], cfg.time_dim,
                                              rng);
    for (int s = S - 2; s >= 0; --s) {
      up_convs_.push_back(std::make_unique<nn::Conv2d<T>>("denoiser.up" + std::to_string(s + 1),
                                                          ch[s + 1], ch[s], 3, 1, 1, nn::Init::kHe,
                                                          rng));
      dec_blocks_.push_back(std::make_unique<nn::ConvBlock<T>>(
          "denoiser.dec" + std::to_string(s + 1), 2 * ch[s], ch[s], cfg.time_dim, rng));
    }
    // stride-recovery tail back to input resolution
    int tail_steps = 0;
    for (int v = strides[0]; v > 1; v /= 2) ++tail_steps;
    int tin = ch[0];
    for (int i = 0; i < tail_steps; ++i) {
      const int tout = std::max(8, ch[0] / 2);
      tail_.push_back(std::make_unique<nn::UpConvBlock<T>>("denoiser.tail" + std::to_string(i + 1),
                                                           tin, tout, rng));
      tin = tout;
    }
    head_ = std::make_unique<nn::Conv2d<T>>("denoiser.head", tin, cfg.num_classes, 3, 1, 1,
                                            nn::Init::kTruncNormal002, rng);
  }

  int scales() const { return static_cast<int>(cfg_.channels.size()); }
  const DenoiserConfig& config() const { return cfg_; }

  // Shared time path: one projection + smooth activation over the sinusoid.
  Tensor<T> time_features(const Tensor<T>& temb) {
    return time_act_.forward(time_fc_->forward(temb));
  }

  // Enc(x_t, t) without conditioning; diagnostic surface, forward-only.
  std::vector<Tensor<T>> encode(const Tensor<T>& x_t, const Tensor<T>& temb) {
    const int S = scales();
    Tensor<T> tf = time_features(temb);
    std::vector<Tensor<T>> z;
    Tensor<T> h = stem_->forward(x_t);
    for (int s = 0; s < S; ++s) {
      if (s > 0) h = downs_[s - 1]->forward(z.back());
      z.push_back(enc_blocks_[s]->forward(h, tf));
    }
    return z;
  }

  // x0_hat = D([z (+) c], t). The conditioning pyramid must match the encoder
  // geometry scale-for-scale.
  DenoiserOutput<T> predict_x0(const Tensor<T>& x_t, const PyramidFeatures<T>& c,
                               const Tensor<T>& temb) {
    const int S = scales();
    if (static_cast<int>(c.stages.size()) != S)
      throw std::invalid_argument("predict_x0: conditioning pyramid scale count mismatch");
    tf_ = time_features(temb);

    DenoiserOutput<T> out;
    fused_.clear();
    Tensor<T> h = stem_->forward(x_t);
    for (int s = 0; s < S; ++s) {
      if (s > 0) h = downs_[s - 1]->forward(fused_[s - 1]);
      Tensor<T> z = enc_blocks_[s]->forward(h, tf_);
      if (c.stages[s].dim(2) != z.dim(2) || c.stages[s].dim(3) != z.dim(3))
        throw std::invalid_argument("predict_x0: conditioning spatial dims mismatch at scale " +
                                    std::to_string(s + 1));
      fused_.push_back(fuses_[s]->forward(z, c.stages[s]));
      out.encoder_features.push_back(std::move(z));
    }

    Tensor<T> d = mid_->forward(fused_[S - 1], tf_);
    for (int i = 0; i < S - 1; ++i) {
      const int s = S - 2 - i;
      d = up_convs_[i]->forward(up_samples(i).forward(d));
      d = dec_blocks_[i]->forward(nn::concat_channels(d, fused_[s]), tf_);
    }
    for (auto& t : tail_) d = t->forward(d);
    out.x0_hat = head_->forward(d);
    return out;
  }

  // Backpropagates dL/dx0_hat; returns per-scale gradients w.r.t. the
  // conditioning pyramid (for the adapter). Parameter grads accumulate.
  std::vector<Tensor<T>> backward(const Tensor<T>& dx0_hat) {
    const int S = scales();
    Tensor<T> dtf({tf_.dim(0), cfg_.time_dim});

    Tensor<T> dd = head_->backward(dx0_hat);
    for (auto it = tail_.rbegin(); it != tail_.rend(); ++it) dd = (*it)->backward(dd);

    std::vector<Tensor<T>> dfused(S);
    for (int i = S - 2; i >= 0; --i) {
      const int s = S - 2 - i;
      Tensor<T> dcat = dec_blocks_[i]->backward(dd, dtf);
      Tensor<T> dup, dskip;
      nn::split_channels(dcat, dup, dskip, cfg_.channels[s], cfg_.channels[s]);
      accumulate(dfused[s], dskip);
      dd = up_samples(i).backward(up_convs_[i]->backward(dup));
    }
    accumulate(dfused[S - 1], mid_->backward(dd, dtf));

    std::vector<Tensor<T>> dc(S);
    for (int s = S - 1; s >= 0; --s) {
      Tensor<T> dz = fuses_[s]->backward(dfused[s], dc[s]);
      Tensor<T> dh = enc_blocks_[s]->backward(dz, dtf);
      if (s > 0)
        accumulate(dfused[s - 1], downs_[s - 1]->backward(dh));
      else
        stem_->backward(dh);  // input gradient unused
    }

    time_fc_->backward(time_act_.backward(dtf));
    return dc;
  }

  void collect_params(std::vector<nn::Parameter<T>*>& out) override {
    time_fc_->collect_params(out);
    stem_->collect_params(out);
    const int S = scales();
    for (int s = 0; s < S; ++s) {
      if (s > 0) downs_[s - 1]->collect_params(out);
      enc_blocks_[s]->collect_params(out);
      fuses_[s]->collect_params(out);
    }
    mid_->collect_params(out);
    for (int i = 0; i < S - 1; ++i) {
      up_convs_[i]->collect_params(out);
      dec_blocks_[i]->collect_params(out);
    }
    for (auto& t : tail_) t->collect_params(out);
    head_->collect_params(out);
  }

  nn::Fuse<T>& fuse(int scale) { return *fuses_[scale]; }

 private:
  static void accumulate(Tensor<T>& into, const Tensor<T>& v) {
    if (into.empty())
      into = v;
    else
      into += v;
  }

  nn::Upsample2x<T>& up_samples(int i) {
    while (static_cast<int>(dec_ups_.size()) <= i)
      dec_ups_.push_back(std::make_unique<nn::Upsample2x<T>>());
    return *dec_ups_[i];
  }

  DenoiserConfig cfg_;
  std::vector<int> strides_;
  std::unique_ptr<nn::Linear<T>> time_fc_;
  nn::SiLU<T> time_act_;
  std::unique_ptr<nn::Conv2d<T>> stem_;
  std::vector<std::unique_ptr<nn::ConvBlock<T>>> enc_blocks_;
  std::vector<std::unique_ptr<nn::Conv2d<T>>> downs_;
  std::vector<std::unique_ptr<nn::Fuse<T>>> fuses_;
  std::unique_ptr<nn::ConvBlock<T>> mid_;
  std::vector<std::unique_ptr<nn::Conv2d<T>>> up_convs_;
  std::vector<std::unique_ptr<nn::ConvBlock<T>>> dec_blocks_;
  std::vector<std::unique_ptr<nn::Upsample2x<T>>> dec_ups_;
  std::vector<std::unique_ptr<nn::UpConvBlock<T>>> tail_;
  std::unique_ptr<nn::Conv2d<T>> head_;
  std::vector<Tensor<T>> fused_;
  Tensor<T> tf_;
};

}  // namespace condiff

#endif  // CONDIFF_DENOISER_HPP
