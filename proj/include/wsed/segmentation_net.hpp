/* Copyright 2026 The wsed Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "wsed/error.hpp"
#include "wsed/nn/activation.hpp"
#include "wsed/nn/batch_norm.hpp"
#include "wsed/nn/conv2d.hpp"
#include "wsed/nn/tensor.hpp"
#include "wsed/pooling.hpp"
#include "wsed/random.hpp"

namespace wsed {

struct NetworkConfig {
  std::size_t n_mels = 40;
  std::size_t n_classes = 4;
  std::vector<std::size_t> block_channels = {16, 32};
  std::size_t convs_per_block = 2;
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;

  // The full-size configuration: four doubled 3x3 blocks of 32/64/128/128
  // maps, 64 mel bins, 41 classes.
  static NetworkConfig full_scale() {
    NetworkConfig c;
    c.n_mels = 64;
    c.n_classes = 41;
    c.block_channels = {32, 64, 128, 128};
    return c;
  }
};

inline void validate(const NetworkConfig& c) {
  require(!c.block_channels.empty(), ErrorKind::kInvalidArgument, "block_channels must be non-empty");
  for (auto ch : c.block_channels) {
    require(ch >= 1, ErrorKind::kInvalidArgument, "block channel counts must be >= 1");
  }
  require(c.convs_per_block >= 1, ErrorKind::kInvalidArgument, "convs_per_block must be >= 1");
  require(c.n_classes >= 1, ErrorKind::kInvalidArgument, "n_classes must be >= 1");
  require(c.n_mels >= 1, ErrorKind::kInvalidArgument, "n_mels must be >= 1");
}

inline void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = nlohmann::json{{"n_mels", c.n_mels},
                     {"n_classes", c.n_classes},
                     {"block_channels", c.block_channels},
                     {"convs_per_block", c.convs_per_block},
                     {"bn_momentum", c.bn_momentum},
                     {"bn_eps", c.bn_eps}};
}

inline void from_json(const nlohmann::json& j, NetworkConfig& c) {
  j.at("n_mels").get_to(c.n_mels);
  j.at("n_classes").get_to(c.n_classes);
  j.at("block_channels").get_to(c.block_channels);
  j.at("convs_per_block").get_to(c.convs_per_block);
  j.at("bn_momentum").get_to(c.bn_momentum);
  j.at("bn_eps").get_to(c.bn_eps);
}

// K masks of one clip, (class, time, freq) row-major, values in [0, 1].
struct MaskStack {
  std::vector<float> values;
  std::size_t n_classes = 0;
  std::size_t num_frames = 0;
  std::size_t n_bins = 0;

  std::span<const float> mask(std::size_t k) const {
    return {values.data() + k * num_frames * n_bins, num_frames * n_bins};
  }
  float at(std::size_t k, std::size_t t, std::size_t f) const {
    return values[(k * num_frames + t) * n_bins + f];
  }
};

template <typename T>
MaskStack mask_stack(const nn::Tensor4<T>& masks, std::size_t clip) {
  const auto& s = masks.shape();
  MaskStack out;
  out.n_classes = s.channels;
  out.num_frames = s.time;
  out.n_bins = s.freq;
  out.values.resize(s.channels * s.plane());
  const T* src = masks.data() + masks.index(clip, 0, 0, 0);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = static_cast<float>(src[i]);
  return out;
}

// p_k = pooling(h_k) for every class.
inline std::vector<double> predict_tags(const MaskStack& masks, const pooling::PoolingSpec& spec) {
  pooling::validate(spec);
  std::vector<double> p(masks.n_classes);
  for (std::size_t k = 0; k < masks.n_classes; ++k) p[k] = pooling::pool(masks.mask(k), spec);
  return p;
}

// Pools every (clip, class) plane of a (N, K, T, F) mask tensor into N x K probabilities.
template <typename T>
std::vector<double> pool_masks(const nn::Tensor4<T>& masks, const pooling::PoolingSpec& spec) {
  const auto& s = masks.shape();
  std::vector<double> p(s.batch * s.channels);
  for (std::size_t n = 0; n < s.batch; ++n) {
    for (std::size_t k = 0; k < s.channels; ++k) p[n * s.channels + k] = pooling::pool(masks.plane(n, k), spec);
  }
  return p;
}

template <typename T>
nn::Tensor4<T> pool_masks_backward(const nn::Tensor4<T>& masks, const pooling::PoolingSpec& spec,
                                   std::span<const double> grad_probs) {
  const auto& s = masks.shape();
  require(grad_probs.size() == s.batch * s.channels, ErrorKind::kShape,
          "pooling backward: gradient count mismatch");
  nn::Tensor4<T> grad(s);
  for (std::size_t n = 0; n < s.batch; ++n) {
    for (std::size_t k = 0; k < s.channels; ++k) {
      pooling::pool_backward(masks.plane(n, k), spec, grad_probs[n * s.channels + k], grad.plane(n, k));
    }
  }
  return grad;
}

// The segmentation mapping: blocks of {3x3 conv, batch norm, ReLU} x
// convs_per_block, then a 1x1 conv with sigmoid producing one mask per class.
// Same padding and no pooling or striding, so masks keep the input's
// (time, freq) size.
template <typename T>
class SegmentationNet {
 public:
  SegmentationNet(const NetworkConfig& config, std::uint64_t seed) : config_(config) {
    validate(config_);
    Rng rng(derive_seed(seed, 0x5E6E7));
    std::size_t in = 1;
    for (std::size_t b = 0; b < config_.block_channels.size(); ++b) {
      for (std::size_t i = 0; i < config_.convs_per_block; ++i) {
        const std::size_t out = config_.block_channels[b];
        Stage stage;
        stage.name = "block" + std::to_string(b) + "." + std::to_string(i);
        stage.conv = nn::Conv2d<T>(in, out, 3);
        stage.conv.init(rng);
        stage.bn = nn::BatchNorm2d<T>(out, config_.bn_momentum, config_.bn_eps);
        stage.act = nn::ActivationLayer<T>(nn::Activation::kRelu);
        stages_.push_back(std::move(stage));
        in = out;
      }
    }
    head_ = nn::Conv2d<T>(in, config_.n_classes, 1);
    head_.init(rng);
    head_act_ = nn::ActivationLayer<T>(nn::Activation::kSigmoid);
  }

  const NetworkConfig& config() const { return config_; }

  // x: (N, 1, T, n_mels) -> masks (N, K, T, n_mels). The mode selects batch
  // or running statistics in every batch-norm layer.
  nn::Tensor4<T> forward(const nn::Tensor4<T>& x, nn::Mode mode) {
    const auto& s = x.shape();
    require(s.channels == 1, ErrorKind::kShape, "network input must have one channel");
    require(s.freq == config_.n_mels, ErrorKind::kShape,
            "input has " + std::to_string(s.freq) + " mel bins, network expects " +
                std::to_string(config_.n_mels));
    require(s.batch >= 1 && s.time >= 1, ErrorKind::kShape, "empty network input");
    require_finite(x.span(), "network input");
    nn::Tensor4<T> h = x;
    for (auto& stage : stages_) {
      h = stage.conv.forward(std::move(h));
      h = stage.bn.forward(h, mode);
      h = stage.act.forward(h);
    }
    h = head_.forward(std::move(h));
    h = head_act_.forward(h);
    require_finite(h.span(), "network output");
    return h;
  }

  // Accumulates parameter gradients from d loss / d masks.
  void backward(const nn::Tensor4<T>& grad_masks) {
    nn::Tensor4<T> g = head_act_.backward(grad_masks);
    g = head_.backward(g);
    for (auto it = stages_.rbegin(); it != stages_.rend(); ++it) {
      g = it->act.backward(g);
      g = it->bn.backward(g);
      g = it->conv.backward(g);
    }
  }

  void zero_grad() {
    for (auto& stage : stages_) {
      stage.conv.zero_grad();
      stage.bn.zero_grad();
    }
    head_.zero_grad();
  }

  void clear_cache() {
    for (auto& stage : stages_) {
      stage.conv.clear_cache();
      stage.bn.clear_cache();
      stage.act.clear_cache();
    }
    head_.clear_cache();
    head_act_.clear_cache();
  }

  std::vector<nn::ParamRef<T>> parameters() {
    std::vector<nn::ParamRef<T>> out;
    for (auto& s : stages_) {
      const std::size_t o = s.conv.out_channels(), i = s.conv.in_channels();
      out.push_back({s.name + ".conv.weight", {o, i, 3, 3}, &s.conv.weight, &s.conv.grad_weight});
      out.push_back({s.name + ".conv.bias", {o}, &s.conv.bias, &s.conv.grad_bias});
      out.push_back({s.name + ".bn.gamma", {o}, &s.bn.gamma, &s.bn.grad_gamma});
      out.push_back({s.name + ".bn.beta", {o}, &s.bn.beta, &s.bn.grad_beta});
    }
    const std::size_t o = head_.out_channels(), i = head_.in_channels();
    out.push_back({"head.conv.weight", {o, i, 1, 1}, &head_.weight, &head_.grad_weight});
    out.push_back({"head.conv.bias", {o}, &head_.bias, &head_.grad_bias});
    return out;
  }

  std::vector<nn::BufferRef<T>> buffers() {
    std::vector<nn::BufferRef<T>> out;
    for (auto& s : stages_) {
      const std::size_t c = s.bn.channels();
      out.push_back({s.name + ".bn.running_mean", {c}, &s.bn.running_mean});
      out.push_back({s.name + ".bn.running_var", {c}, &s.bn.running_var});
    }
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.value->size();
    return n;
  }

 private:
  struct Stage {
    std::string name;
    nn::Conv2d<T> conv;
    nn::BatchNorm2d<T> bn;
    nn::ActivationLayer<T> act;
  };

  NetworkConfig config_;
  std::vector<Stage> stages_;
  nn::Conv2d<T> head_;
  nn::ActivationLayer<T> head_act_;
};

}  // namespace wsed
