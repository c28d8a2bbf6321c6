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

#include <cmath>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "wsed/audio/features.hpp"
#include "wsed/error.hpp"
#include "wsed/manifest.hpp"
#include "wsed/nn/adam.hpp"
#include "wsed/nn/loss.hpp"
#include "wsed/pooling.hpp"
#include "wsed/random.hpp"
#include "wsed/segmentation_net.hpp"
#include "wsed/tensor_io.hpp"

namespace wsed {

// ---- configuration -------------------------------------------------------

struct TrainConfig {
  std::size_t batch_size = 24;
  double lr = 0.001;
  std::size_t epochs = 30;
  pooling::PoolingSpec pooling;
  std::uint64_t seed = 0;
  // Fold held out for testing; -1 trains on every clip.
  int test_fold = -1;
  // Run batch norm on its running statistics during training.
  bool freeze_bn = false;
  nn::BceOptions bce;
};

inline void validate(const TrainConfig& c) {
  require(c.batch_size >= 1, ErrorKind::kInvalidArgument, "batch size must be >= 1");
  require(c.epochs >= 1, ErrorKind::kInvalidArgument, "epochs must be >= 1");
  require(c.lr > 0.0, ErrorKind::kInvalidArgument, "learning rate must be positive");
  pooling::validate(c.pooling);
}

inline nlohmann::json to_json_value(const pooling::PoolingSpec& p) {
  return {{"kind", pooling::to_string(p.kind)}, {"r", p.r}};
}

inline pooling::PoolingSpec pooling_from_json(const nlohmann::json& j) {
  return {pooling::parse_kind(j.at("kind").get<std::string>()), j.at("r").get<double>()};
}

inline nlohmann::json to_json_value(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"lr", c.lr},
          {"epochs", c.epochs},
          {"pooling", to_json_value(c.pooling)},
          {"seed", c.seed},
          {"test_fold", c.test_fold},
          {"freeze_bn", c.freeze_bn},
          {"bce_clamp", c.bce.clamp},
          {"bce_positive_term_only", c.bce.positive_term_only}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  j.at("batch_size").get_to(c.batch_size);
  j.at("lr").get_to(c.lr);
  j.at("epochs").get_to(c.epochs);
  c.pooling = pooling_from_json(j.at("pooling"));
  j.at("seed").get_to(c.seed);
  j.at("test_fold").get_to(c.test_fold);
  j.at("freeze_bn").get_to(c.freeze_bn);
  j.at("bce_clamp").get_to(c.bce.clamp);
  j.at("bce_positive_term_only").get_to(c.bce.positive_term_only);
  return c;
}

// ---- data ----------------------------------------------------------------

struct TrainingClip {
  std::string clip_id;
  int fold = 0;
  audio::LogMelSpectrogram log_mel;
  std::vector<int> weak_labels;
};

inline std::vector<int> weak_labels(const ManifestEntry& entry, const std::vector<std::string>& labels) {
  std::vector<int> y(labels.size(), 0);
  for (const auto& ev : entry.events) {
    const auto it = std::find(labels.begin(), labels.end(), ev.label);
    require(it != labels.end(), ErrorKind::kInvalidArgument,
            "clip " + entry.clip_id + ": unknown label '" + ev.label + "'");
    y[static_cast<std::size_t>(it - labels.begin())] = 1;
  }
  return y;
}

// Reads and featurizes every manifest clip accepted by `keep`.
inline std::vector<TrainingClip> load_training_clips(const Manifest& manifest,
                                                     const std::vector<std::string>& labels,
                                                     const audio::FeatureExtractor& extractor,
                                                     const std::function<bool(const ManifestEntry&)>& keep) {
  std::vector<TrainingClip> clips;
  for (const auto& entry : manifest.entries) {
    if (!keep(entry)) continue;
    const auto wave = audio::read_wav(manifest.resolve(entry.mixture));
    clips.push_back({entry.clip_id, entry.fold, extractor(wave).log_mel, weak_labels(entry, labels)});
  }
  return clips;
}

// Per-mel-bin standardization estimated on the training clips.
struct FeatureNorm {
  std::vector<double> mean;
  std::vector<double> std;
};

inline FeatureNorm fit_feature_norm(const std::vector<TrainingClip>& clips, std::size_t n_mels) {
  FeatureNorm norm{std::vector<double>(n_mels, 0.0), std::vector<double>(n_mels, 1.0)};
  std::vector<double> sum(n_mels, 0.0), sq(n_mels, 0.0);
  double frames = 0.0;
  for (const auto& c : clips) {
    for (std::size_t t = 0; t < c.log_mel.num_frames; ++t) {
      for (std::size_t m = 0; m < n_mels; ++m) {
        const double v = c.log_mel.at(t, m);
        sum[m] += v;
        sq[m] += v * v;
      }
    }
    frames += static_cast<double>(c.log_mel.num_frames);
  }
  if (frames == 0.0) return norm;
  for (std::size_t m = 0; m < n_mels; ++m) {
    norm.mean[m] = sum[m] / frames;
    const double var = std::max(0.0, sq[m] / frames - norm.mean[m] * norm.mean[m]);
    norm.std[m] = std::max(std::sqrt(var), 1e-6);
  }
  return norm;
}

// Stacks log-mel spectrograms into a (N, 1, T, n_mels) network input.
inline nn::Tensor4<float> stack_inputs(const std::vector<const audio::LogMelSpectrogram*>& mels,
                                       const FeatureNorm& norm) {
  require(!mels.empty(), ErrorKind::kInvalidArgument, "empty batch");
  const std::size_t T = mels.front()->num_frames, M = mels.front()->n_mels;
  require(norm.mean.size() == M, ErrorKind::kShape, "feature normalization does not match mel bins");
  nn::Tensor4<float> x(mels.size(), 1, T, M);
  for (std::size_t n = 0; n < mels.size(); ++n) {
    require(mels[n]->num_frames == T && mels[n]->n_mels == M, ErrorKind::kShape,
            "clips in one batch must have the same number of frames");
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t m = 0; m < M; ++m) {
        x(n, 0, t, m) = static_cast<float>((mels[n]->at(t, m) - norm.mean[m]) / norm.std[m]);
      }
    }
  }
  return x;
}

// Deterministic shuffle keyed by (seed, epoch), cut into batches; the last
// short batch is kept.
inline std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> ids, std::size_t batch_size,
                                                          std::uint64_t seed, std::uint64_t epoch) {
  require(batch_size >= 1, ErrorKind::kInvalidArgument, "batch size must be >= 1");
  Rng rng(derive_seed(seed, 0xBA7C0000ULL + epoch));
  shuffle(std::span<std::size_t>(ids), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < ids.size(); i += batch_size) {
    batches.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(i),
                         ids.begin() + static_cast<std::ptrdiff_t>(std::min(ids.size(), i + batch_size)));
  }
  return batches;
}

// ---- model ---------------------------------------------------------------

// Everything needed to resume training or run inference.
struct Model {
  Model(const NetworkConfig& net_config, std::uint64_t seed) : net(net_config, seed) {}

  audio::FeatureConfig features;
  FeatureNorm norm;
  std::vector<std::string> labels;
  TrainConfig train;
  SegmentationNet<float> net;
  nn::AdamState<float> adam;
  std::size_t epoch = 0;

  const NetworkConfig& network_config() const { return net.config(); }

  nlohmann::json config_json() const {
    return {{"network", net.config()},
            {"features", features},
            {"labels", labels},
            {"train", to_json_value(train)},
            {"epoch", epoch},
            {"adam_step", adam.step_count}};
  }

  // Eval-mode masks for one clip.
  MaskStack masks(const audio::LogMelSpectrogram& mel) {
    auto out = net.forward(stack_inputs({&mel}, norm), nn::Mode::kEval);
    net.clear_cache();
    return mask_stack(out, 0);
  }
};

// ---- checkpoint ----------------------------------------------------------

namespace detail {

inline io::NamedTensor float_tensor(const std::string& name, const std::vector<std::size_t>& dims,
                                    const std::vector<float>& values) {
  io::NamedTensor t;
  t.name = name;
  t.dtype = io::DType::kFloat32;
  t.dims.assign(dims.begin(), dims.end());
  t.f32 = values;
  return t;
}

inline std::vector<float> to_float(const std::vector<double>& v) { return {v.begin(), v.end()}; }

}  // namespace detail

inline std::vector<io::NamedTensor> checkpoint_tensors(Model& model) {
  std::vector<io::NamedTensor> out;
  const std::string config = model.config_json().dump();
  io::NamedTensor cfg;
  cfg.name = "__config__";
  cfg.dtype = io::DType::kUint8;
  cfg.dims = {config.size()};
  cfg.u8.assign(config.begin(), config.end());
  out.push_back(std::move(cfg));

  const std::size_t M = model.norm.mean.size();
  out.push_back(detail::float_tensor("feature.mean", {M}, detail::to_float(model.norm.mean)));
  out.push_back(detail::float_tensor("feature.std", {M}, detail::to_float(model.norm.std)));

  const auto params = model.net.parameters();
  for (const auto& p : params) out.push_back(detail::float_tensor(p.name, p.dims, *p.value));
  for (const auto& b : model.net.buffers()) out.push_back(detail::float_tensor(b.name, b.dims, *b.value));
  if (!model.adam.m.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      out.push_back(detail::float_tensor("adam.m." + params[i].name, params[i].dims, model.adam.m[i]));
      out.push_back(detail::float_tensor("adam.v." + params[i].name, params[i].dims, model.adam.v[i]));
    }
  }
  return out;
}

inline std::vector<std::uint8_t> encode_checkpoint(Model& model) {
  return io::encode_container(checkpoint_tensors(model));
}

inline void save_checkpoint(Model& model, const std::filesystem::path& path) {
  io::write_bytes(path, encode_checkpoint(model));
}

// Copies network parameters and running statistics from a tensor list into
// `net`, checking every name and shape.
inline void restore_network(SegmentationNet<float>& net, const std::vector<io::NamedTensor>& tensors) {
  std::map<std::string, const io::NamedTensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t;
  const auto copy = [&](const std::string& name, const std::vector<std::size_t>& dims, std::vector<float>& dst) {
    const auto it = by_name.find(name);
    require(it != by_name.end(), ErrorKind::kFormat, "checkpoint is missing tensor " + name);
    const auto& t = *it->second;
    const std::vector<std::uint64_t> want(dims.begin(), dims.end());
    if (t.dims != want || t.dtype != io::DType::kFloat32) {
      std::string got, expected;
      for (auto d : t.dims) got += std::to_string(d) + " ";
      for (auto d : want) expected += std::to_string(d) + " ";
      fail(ErrorKind::kShape, "checkpoint tensor " + name + " has shape [ " + got + "], network expects [ " +
                                  expected + "]");
    }
    dst = t.f32;
  };
  for (const auto& p : net.parameters()) copy(p.name, p.dims, *p.value);
  for (const auto& b : net.buffers()) copy(b.name, b.dims, *b.value);
}

inline Model decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& context) {
  const auto tensors = io::decode_container(bytes, context);
  std::map<std::string, const io::NamedTensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t;
  const auto get = [&](const std::string& name) -> const io::NamedTensor& {
    const auto it = by_name.find(name);
    if (it == by_name.end()) fail(ErrorKind::kFormat, context + ": missing tensor " + name);
    return *it->second;
  };

  const auto& cfg_tensor = get("__config__");
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(std::string(cfg_tensor.u8.begin(), cfg_tensor.u8.end()));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, context + ": bad embedded config: " + e.what());
  }

  Model model(cfg.at("network").get<NetworkConfig>(), 0);
  model.features = cfg.at("features").get<audio::FeatureConfig>();
  model.labels = cfg.at("labels").get<std::vector<std::string>>();
  model.train = train_config_from_json(cfg.at("train"));
  model.epoch = cfg.at("epoch").get<std::size_t>();
  model.adam.options.lr = model.train.lr;
  model.adam.step_count = cfg.at("adam_step").get<std::uint64_t>();
  require(model.labels.size() == model.network_config().n_classes, ErrorKind::kShape,
          context + ": label list does not match network class count");

  const auto& mean = get("feature.mean");
  const auto& stdev = get("feature.std");
  model.norm.mean.assign(mean.f32.begin(), mean.f32.end());
  model.norm.std.assign(stdev.f32.begin(), stdev.f32.end());
  require(model.norm.mean.size() == model.network_config().n_mels && model.norm.std.size() == model.norm.mean.size(),
          ErrorKind::kShape, context + ": feature normalization does not match mel bins");

  restore_network(model.net, tensors);
  const auto params = model.net.parameters();
  if (by_name.count("adam.m." + params.front().name)) {
    model.adam.m.resize(params.size());
    model.adam.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& m = get("adam.m." + params[i].name);
      const auto& v = get("adam.v." + params[i].name);
      require(m.f32.size() == params[i].value->size() && v.f32.size() == params[i].value->size(),
              ErrorKind::kShape, context + ": optimizer state shape mismatch for " + params[i].name);
      model.adam.m[i] = m.f32;
      model.adam.v[i] = v.f32;
    }
  }
  return model;
}

inline Model load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_bytes(path), path.string());
}

// ---- training loop -------------------------------------------------------

struct EpochLog {
  std::size_t epoch = 0;
  // Mean per-clip loss over the epoch.
  double loss = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  // Loss of the very first batch, before any update.
  double first_batch_loss = 0.0;
};

// One optimisation step on the given clips. Returns the mean per-clip loss.
inline double train_step(Model& model, const std::vector<const TrainingClip*>& batch) {
  std::vector<const audio::LogMelSpectrogram*> mels;
  for (const auto* c : batch) mels.push_back(&c->log_mel);
  const auto x = stack_inputs(mels, model.norm);
  const auto mode = model.train.freeze_bn ? nn::Mode::kEval : nn::Mode::kTrain;
  const auto masks = model.net.forward(x, mode);
  const auto probs = pool_masks(masks, model.train.pooling);

  const std::size_t K = model.labels.size();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  std::vector<double> grad_probs(probs.size());
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto res = nn::bce_loss<double, int>(std::span<const double>(probs.data() + n * K, K),
                                               batch[n]->weak_labels, model.train.bce);
    loss += res.loss * inv_n;
    for (std::size_t k = 0; k < K; ++k) grad_probs[n * K + k] = res.grad[k] * inv_n;
  }
  if (!std::isfinite(loss)) fail(ErrorKind::kNumeric, "training loss is not finite");

  model.net.zero_grad();
  model.net.backward(pool_masks_backward(masks, model.train.pooling, grad_probs));
  const auto params = model.net.parameters();
  nn::adam_step<float>(params, model.adam);
  model.net.clear_cache();
  return loss;
}

// Initializes a model for the given clips (class list, feature statistics,
// network) without training it.
inline Model init_model(const std::vector<TrainingClip>& clips, const std::vector<std::string>& labels,
                        const audio::FeatureConfig& features, NetworkConfig net_config, const TrainConfig& config) {
  validate(config);
  require(!clips.empty(), ErrorKind::kInvalidArgument, "no training clips in the selected folds");
  net_config.n_classes = labels.size();
  net_config.n_mels = features.n_mels;
  Model model(net_config, config.seed);
  model.features = features;
  model.labels = labels;
  model.train = config;
  model.adam.options.lr = config.lr;
  model.norm = fit_feature_norm(clips, features.n_mels);
  // The checkpoint stores these as float32; round now so a reloaded model
  // normalizes exactly like the one that was trained.
  for (auto* v : {&model.norm.mean, &model.norm.std}) {
    for (double& x : *v) x = static_cast<float>(x);
  }
  return model;
}

// Runs epochs [model.epoch, model.train.epochs).
inline TrainResult train(Model& model, const std::vector<TrainingClip>& clips,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  require(!clips.empty(), ErrorKind::kInvalidArgument, "no training clips in the selected folds");
  for (const auto& c : clips) {
    require(c.weak_labels.size() == model.labels.size(), ErrorKind::kShape,
            "clip " + c.clip_id + " has a label vector of the wrong length");
  }
  std::vector<std::size_t> ids(clips.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});

  TrainResult result;
  bool first = true;
  for (; model.epoch < model.train.epochs; ++model.epoch) {
    double total = 0.0;
    for (const auto& batch_ids : make_batches(ids, model.train.batch_size, model.train.seed, model.epoch)) {
      std::vector<const TrainingClip*> batch;
      for (auto i : batch_ids) batch.push_back(&clips[i]);
      const double loss = train_step(model, batch);
      if (first) {
        result.first_batch_loss = loss;
        first = false;
      }
      total += loss * static_cast<double>(batch.size());
    }
    EpochLog entry{model.epoch, total / static_cast<double>(clips.size())};
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

}  // namespace wsed
