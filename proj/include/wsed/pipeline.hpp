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
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "wsed/audio/features.hpp"
#include "wsed/audio/wav.hpp"
#include "wsed/error.hpp"
#include "wsed/manifest.hpp"
#include "wsed/metrics.hpp"
#include "wsed/postprocess.hpp"
#include "wsed/segmentation_net.hpp"
#include "wsed/separation.hpp"
#include "wsed/training.hpp"

namespace wsed {

struct EvalConfig {
  sed::DetectionConfig detection;
  double frame_threshold = 0.2;
  double tf_threshold = 0.5;
  // Reference T-F units are active where the mel-averaged IRM exceeds this.
  double irm_threshold = 0.5;
  metrics::CollarSpec collars;
};

inline nlohmann::json to_json_value(const EvalConfig& c) {
  return {{"detection", c.detection},
          {"frame_threshold", c.frame_threshold},
          {"tf_threshold", c.tf_threshold},
          {"irm_threshold", c.irm_threshold},
          {"collars", {{"onset", c.collars.onset}, {"offset_abs", c.collars.offset_abs},
                       {"offset_rel", c.collars.offset_rel}}}};
}

// A clip with strong labels and, when available, per-class reference signals.
struct EvalClip {
  std::string clip_id;
  audio::Waveform mixture;
  std::vector<EventAnnotation> events;
  // Full-length sum of each class's isolated events; empty when the clip has
  // no isolated sources.
  std::vector<std::vector<double>> class_sources;
};

// Reads the mixture and places every isolated event source at its onset.
inline EvalClip load_eval_clip(const Manifest& manifest, const ManifestEntry& entry,
                               const std::vector<std::string>& labels) {
  EvalClip clip;
  clip.clip_id = entry.clip_id;
  clip.mixture = audio::read_wav(manifest.resolve(entry.mixture));
  const std::size_t n = clip.mixture.samples.size();
  bool have_sources = true;
  for (const auto& ev : entry.events) {
    const auto it = std::find(labels.begin(), labels.end(), ev.label);
    require(it != labels.end(), ErrorKind::kInvalidArgument,
            "clip " + entry.clip_id + ": label '" + ev.label + "' is not known to the model");
    clip.events.push_back({static_cast<std::size_t>(it - labels.begin()), ev.onset, ev.offset});
    have_sources = have_sources && !ev.source.empty();
  }
  if (!have_sources || entry.events.empty()) return clip;
  clip.class_sources.assign(labels.size(), std::vector<double>(n, 0.0));
  for (std::size_t e = 0; e < entry.events.size(); ++e) {
    const auto src = audio::read_wav(manifest.resolve(entry.events[e].source));
    require(src.sample_rate == clip.mixture.sample_rate, ErrorKind::kFormat,
            "clip " + entry.clip_id + ": source sample rate differs from the mixture");
    const auto start = static_cast<std::size_t>(std::llround(entry.events[e].onset * clip.mixture.sample_rate));
    auto& dst = clip.class_sources[clip.events[e].label];
    for (std::size_t i = 0; i < src.samples.size() && start + i < n; ++i) dst[start + i] += src.samples[i];
  }
  return clip;
}

struct ClipInference {
  audio::ClipFeatures features;
  MaskStack masks;
  std::vector<double> tags;
  std::vector<sed::DetectedEvent> events;
};

// Detection from already computed masks.
inline ClipInference infer_from_masks(audio::ClipFeatures features, MaskStack masks, const Model& model,
                                      const sed::DetectionConfig& detection) {
  ClipInference out;
  out.tags = predict_tags(masks, model.train.pooling);
  out.events = sed::detect_from_masks(masks, out.tags, model.features.hop, model.features.sample_rate, detection);
  out.features = std::move(features);
  out.masks = std::move(masks);
  return out;
}

// Features, forward pass, tags, gate, frame scores, thresholds, duration rules.
inline ClipInference infer_clip(Model& model, const audio::FeatureExtractor& extractor, const audio::Waveform& wave,
                                const sed::DetectionConfig& detection) {
  auto features = extractor(wave);
  require(features.log_mel.num_frames >= 1, ErrorKind::kShape, "clip is shorter than one analysis window");
  auto masks = model.masks(features.log_mel);
  return infer_from_masks(std::move(features), std::move(masks), model, detection);
}

// Frame t is active for a class when its centre time lies in one of the
// class's events.
inline std::vector<std::uint8_t> frame_reference(const std::vector<EventAnnotation>& events, std::size_t n_classes,
                                                 std::size_t num_frames, const audio::FeatureConfig& features) {
  std::vector<std::uint8_t> ref(n_classes * num_frames, 0);
  for (std::size_t t = 0; t < num_frames; ++t) {
    const double centre = (static_cast<double>(t * features.hop) + 0.5 * static_cast<double>(features.window_size)) /
                          static_cast<double>(features.sample_rate);
    for (const auto& e : events) {
      if (centre >= e.onset && centre < e.offset) ref[e.label * num_frames + t] = 1;
    }
  }
  return ref;
}

// Accumulates the four evaluation levels over clips.
class Evaluator {
 public:
  Evaluator(std::vector<std::string> labels, audio::FeatureConfig features, EvalConfig config)
      : labels_(std::move(labels)), features_(features), config_(config), classes_(labels_.size()) {
    sed::validate(config_.detection);
  }

  void add(const EvalClip& clip, const ClipInference& inf, const audio::MelFilterbank& fb) {
    const std::size_t K = labels_.size();
    require(inf.masks.n_classes == K && inf.tags.size() == K, ErrorKind::kShape,
            "inference class count does not match the label list");
    ++n_clips_;
    std::vector<int> present(K, 0);
    for (const auto& e : clip.events) present[e.label] = 1;

    const auto scores = sed::frame_scores(inf.masks);
    const std::size_t T = inf.masks.num_frames;
    const auto ref = frame_reference(clip.events, K, T, features_);

    std::vector<EventAnnotation> ests;
    for (const auto& e : inf.events) ests.push_back(e.annotation());
    const auto event_counts = metrics::match_events(clip.events, ests, K, config_.collars);

    std::vector<std::vector<std::uint8_t>> tf_ref;
    if (!clip.class_sources.empty()) {
      require(clip.class_sources.size() == K, ErrorKind::kShape, "class source count does not match labels");
      const auto& mix_spec = inf.features.spectrogram;
      for (std::size_t k = 0; k < K; ++k) {
        audio::Waveform src{clip.class_sources[k], clip.mixture.sample_rate};
        const auto spec = audio::stft(src, features_.window_size, features_.hop);
        const auto mel = sep::mel_average(sep::ideal_ratio_mask(spec, mix_spec), fb);
        std::vector<std::uint8_t> bits(mel.size());
        for (std::size_t i = 0; i < mel.size(); ++i) bits[i] = mel[i] > config_.irm_threshold;
        tf_ref.push_back(std::move(bits));
      }
    }

    for (std::size_t k = 0; k < K; ++k) {
      auto& c = classes_[k];
      c.tag_scores.push_back(inf.tags[k]);
      c.tag_labels.push_back(static_cast<std::uint8_t>(present[k]));
      const bool tagged = inf.tags[k] > config_.detection.tag_threshold;
      if (tagged && present[k]) ++c.tagging.tp;
      else if (tagged) ++c.tagging.fp;
      else if (present[k]) ++c.tagging.fn;

      const auto row = scores.row(k);
      const std::span<const std::uint8_t> ref_row(ref.data() + k * T, T);
      c.frame += metrics::threshold_counts(row, ref_row, config_.frame_threshold);
      c.frame_scores.insert(c.frame_scores.end(), row.begin(), row.end());
      c.frame_labels.insert(c.frame_labels.end(), ref_row.begin(), ref_row.end());

      c.event += event_counts[k];
      c.er.add(event_counts[k]);

      if (!tf_ref.empty()) {
        const auto mask = inf.masks.mask(k);
        std::vector<double> pred(mask.begin(), mask.end());
        c.tf += metrics::threshold_counts(std::span<const double>(pred), std::span<const std::uint8_t>(tf_ref[k]),
                                          config_.tf_threshold);
        c.tf_scores.insert(c.tf_scores.end(), pred.begin(), pred.end());
        c.tf_labels.insert(c.tf_labels.end(), tf_ref[k].begin(), tf_ref[k].end());
      }
    }
    if (!tf_ref.empty()) ++n_tf_clips_;
  }

  std::size_t clip_count() const { return n_clips_; }

  nlohmann::json report() const {
    nlohmann::json out;
    out["n_clips"] = n_clips_;
    out["n_tf_clips"] = n_tf_clips_;
    out["tagging"] = ranked_level([](const ClassState& c) { return c.tagging; },
                                  [](const ClassState& c) { return std::pair{&c.tag_scores, &c.tag_labels}; });
    out["frame"] = ranked_level([](const ClassState& c) { return c.frame; },
                                [](const ClassState& c) { return std::pair{&c.frame_scores, &c.frame_labels}; });
    out["tf"] = ranked_level([](const ClassState& c) { return c.tf; },
                             [](const ClassState& c) { return std::pair{&c.tf_scores, &c.tf_labels}; });
    out["event"] = event_level();
    return out;
  }

 private:
  struct ClassState {
    metrics::Counts tagging, frame, event, tf;
    metrics::ErComponents er;
    std::vector<double> tag_scores, frame_scores, tf_scores;
    std::vector<std::uint8_t> tag_labels, frame_labels, tf_labels;
  };

  static nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  }

  static nlohmann::json counts_json(const metrics::Counts& c) {
    const auto prf = metrics::precision_recall_f1(c);
    return {{"precision", prf.precision}, {"recall", prf.recall}, {"f1", prf.f1},
            {"tp", c.tp},                 {"fp", c.fp},           {"fn", c.fn}};
  }

  template <typename CountsOf, typename RankedOf>
  nlohmann::json ranked_level(CountsOf counts_of, RankedOf ranked_of) const {
    nlohmann::json per_class = nlohmann::json::object();
    std::vector<std::optional<double>> f1s, aucs, aps;
    std::vector<std::optional<double>> ps, rs;
    for (std::size_t k = 0; k < labels_.size(); ++k) {
      const auto& c = classes_[k];
      auto block = counts_json(counts_of(c));
      const auto [scores, labels] = ranked_of(c);
      const auto a = metrics::auc(std::span<const double>(*scores), std::span<const std::uint8_t>(*labels));
      const auto ap = metrics::average_precision(std::span<const double>(*scores), std::span<const std::uint8_t>(*labels));
      block["auc"] = optional_json(a);
      block["ap"] = optional_json(ap);
      per_class[labels_[k]] = block;
      const auto prf = metrics::precision_recall_f1(counts_of(c));
      ps.push_back(prf.precision);
      rs.push_back(prf.recall);
      f1s.push_back(prf.f1);
      aucs.push_back(a);
      aps.push_back(ap);
    }
    return {{"per_class", per_class},
            {"macro",
             {{"precision", optional_json(metrics::mean_defined(ps))},
              {"recall", optional_json(metrics::mean_defined(rs))},
              {"f1", optional_json(metrics::mean_defined(f1s))},
              {"auc", optional_json(metrics::mean_defined(aucs))},
              {"map", optional_json(metrics::mean_defined(aps))}}}};
  }

  nlohmann::json event_level() const {
    nlohmann::json per_class = nlohmann::json::object();
    std::vector<std::optional<double>> f1s, ers, ss, ds, is;
    for (std::size_t k = 0; k < labels_.size(); ++k) {
      const auto& c = classes_[k];
      auto block = counts_json(c.event);
      block["er"] = optional_json(c.er.er());
      block["s"] = optional_json(c.er.rate(c.er.s));
      block["d"] = optional_json(c.er.rate(c.er.d));
      block["i"] = optional_json(c.er.rate(c.er.i));
      block["n_ref"] = c.er.n_ref;
      per_class[labels_[k]] = block;
      // Classes without reference events have no defined event-level scores.
      f1s.push_back(c.er.n_ref > 0 ? std::optional<double>(metrics::precision_recall_f1(c.event).f1) : std::nullopt);
      ers.push_back(c.er.er());
      ss.push_back(c.er.rate(c.er.s));
      ds.push_back(c.er.rate(c.er.d));
      is.push_back(c.er.rate(c.er.i));
    }
    return {{"per_class", per_class},
            {"macro",
             {{"f1", optional_json(metrics::mean_defined(f1s))},
              {"er", optional_json(metrics::mean_defined(ers))},
              {"s", optional_json(metrics::mean_defined(ss))},
              {"d", optional_json(metrics::mean_defined(ds))},
              {"i", optional_json(metrics::mean_defined(is))}}}};
  }

  std::vector<std::string> labels_;
  audio::FeatureConfig features_;
  EvalConfig config_;
  std::vector<ClassState> classes_;
  std::size_t n_clips_ = 0;
  std::size_t n_tf_clips_ = 0;
};

}  // namespace wsed
