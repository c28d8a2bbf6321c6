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

#include "wsed/audio/mel.hpp"
#include "wsed/audio/stft.hpp"
#include "wsed/audio/wav.hpp"

namespace wsed::audio {

struct FeatureConfig {
  int sample_rate = 16000;
  std::size_t window_size = 1024;
  std::size_t hop = 512;
  std::size_t n_mels = 40;
  double f_min = 0.0;
  // 0 means Nyquist.
  double f_max = 0.0;
  double log_floor = 1e-10;

  double effective_f_max() const { return f_max > 0.0 ? f_max : sample_rate / 2.0; }
  double frame_seconds() const { return static_cast<double>(hop) / sample_rate; }
};

inline void to_json(nlohmann::json& j, const FeatureConfig& c) {
  j = nlohmann::json{{"sample_rate", c.sample_rate}, {"window_size", c.window_size},
                     {"hop", c.hop},                 {"n_mels", c.n_mels},
                     {"f_min", c.f_min},             {"f_max", c.effective_f_max()},
                     {"log_floor", c.log_floor}};
}

inline void from_json(const nlohmann::json& j, FeatureConfig& c) {
  j.at("sample_rate").get_to(c.sample_rate);
  j.at("window_size").get_to(c.window_size);
  j.at("hop").get_to(c.hop);
  j.at("n_mels").get_to(c.n_mels);
  j.at("f_min").get_to(c.f_min);
  j.at("f_max").get_to(c.f_max);
  j.at("log_floor").get_to(c.log_floor);
}

struct ClipFeatures {
  ComplexSpectrogram spectrogram;
  LogMelSpectrogram log_mel;
};

// Caches the analysis window and filterbank for one feature configuration.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const FeatureConfig& config)
      : config_(config),
        window_(hann_window(config.window_size)),
        filterbank_(mel_filterbank(config.sample_rate, config.window_size, config.n_mels,
                                   config.f_min, config.effective_f_max())) {}

  const FeatureConfig& config() const { return config_; }
  const MelFilterbank& filterbank() const { return filterbank_; }
  std::span<const double> window() const { return window_; }

  ClipFeatures operator()(const Waveform& wave) const {
    require(wave.sample_rate == config_.sample_rate, ErrorKind::kInvalidArgument,
            "audio sample rate " + std::to_string(wave.sample_rate) +
                " does not match feature sample rate " + std::to_string(config_.sample_rate));
    ClipFeatures out;
    out.spectrogram = stft(wave, config_.window_size, config_.hop, window_);
    out.log_mel = log_mel(out.spectrogram, filterbank_, config_.log_floor);
    return out;
  }

 private:
  FeatureConfig config_;
  std::vector<double> window_;
  MelFilterbank filterbank_;
};

}  // namespace wsed::audio
