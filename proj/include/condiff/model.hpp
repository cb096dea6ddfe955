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

#ifndef CONDIFF_MODEL_HPP
#define CONDIFF_MODEL_HPP

#include "condiff/denoiser.hpp"

namespace condiff {

struct ModelConfig {
  AdapterConfig adapter;
  DenoiserConfig denoiser;
  int image_channels = 1;
  bool conditioned = true;  // false zeroes the conditioning pyramid (ablation baseline)

  std::vector<std::string> validate() const {
    std::vector<std::string> errs = adapter.validate();
    auto d = denoiser.validate();
    errs.insert(errs.end(), d.begin(), d.end());
    if (denoiser.channels.size() != adapter.stage_dims.size())
      errs.push_back("model: denoiser scale count must equal adapter stage count");
    if (image_channels < 1) errs.push_back("model: image_channels must be >= 1");
    return errs;
  }
};

// x0_hat = D([Enc(x_t, t) (+) E_PVT(I, x_t, t)], t)
template <typename T>
class SegDiffusionModel : public nn::Module<T> {
 public:
  SegDiffusionModel(const ModelConfig& cfg, RngStream& rng)
      : cfg_(cfg),
        adapter_(cfg.adapter, cfg.image_channels, cfg.denoiser.num_classes, cfg.denoiser.time_dim,
                 rng),
        denoiser_(cfg.denoiser, cfg.adapter.stage_strides, cfg.adapter.fusion_mode,
                  cfg.adapter.stage_dims, rng) {
    auto errs = cfg.validate();
    if (!errs.empty()) throw std::invalid_argument("model config: " + errs.front());
  }

  // x_t: [B, K, H, W]; image: [B, C_img, H, W]; ts: one timestep per sample
  DenoiserOutput<T> forward(const Tensor<T>& x_t, const Tensor<T>& image,
                            const std::vector<int>& ts) {
    if (static_cast<int>(ts.size()) != x_t.dim(0))
      throw std::invalid_argument("model: one timestep per batch element required");
    Tensor<T> temb = timestep_embed_batch<T>(ts, cfg_.denoiser.time_dim);
    if (cfg_.conditioned) {
      pyramid_ = adapter_.forward(image, x_t, temb);
    } else {
      pyramid_ = zero_pyramid(x_t.dim(0), x_t.dim(2), x_t.dim(3));
    }
    return denoiser_.predict_x0(x_t, pyramid_, temb);
  }

  // Accumulates parameter gradients for dL/dx0_hat.
  void backward(const Tensor<T>& dx0_hat) {
    std::vector<Tensor<T>> dc = denoiser_.backward(dx0_hat);
    if (cfg_.conditioned) adapter_.backward(dc);
  }

  void collect_params(std::vector<nn::Parameter<T>*>& out) override {
    adapter_.collect_params(out);
    denoiser_.collect_params(out);
  }

  PvtAdapter<T>& adapter() { return adapter_; }
  UnetDenoiser<T>& denoiser() { return denoiser_; }
  const ModelConfig& config() const { return cfg_; }
  const PyramidFeatures<T>& last_pyramid() const { return pyramid_; }
  void set_conditioned(bool v) { cfg_.conditioned = v; }

 private:
  PyramidFeatures<T> zero_pyramid(int B, int H, int W) const {
    PyramidFeatures<T> p;
    int h = H, w = W;
    for (int s = 0; s < cfg_.adapter.stages(); ++s) {
      h /= cfg_.adapter.stage_strides[s];
      w /= cfg_.adapter.stage_strides[s];
      p.stages.emplace_back(std::vector<int>{B, cfg_.adapter.stage_dims[s], h, w});
    }
    return p;
  }

  ModelConfig cfg_;
  PvtAdapter<T> adapter_;
  UnetDenoiser<T> denoiser_;
  PyramidFeatures<T> pyramid_;
};

}  // namespace condiff

#endif  // CONDIFF_MODEL_HPP
