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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "wsed/audio/fft.hpp"
#include "wsed/audio/wav.hpp"
#include "wsed/error.hpp"
#include "wsed/manifest.hpp"
#include "wsed/random.hpp"

// Synthetic weakly-labelled mixtures: parametric event classes placed
// without overlap over a coloured-noise scene, each scaled to a target SNR
// measured over the event's own active interval.

namespace wsed::datagen {

using audio::Waveform;

enum class Family { kTone, kChirp, kAmTone, kHarmonic, kNoiseBurst, kClickTrain };

struct EventClassSpec {
  std::string name;
  Family family = Family::kTone;
  // Fundamental / carrier / band range in Hz.
  double f_lo = 0.0;
  double f_hi = 0.0;
  // Modulation or click rate range in Hz (am_tone, click_train).
  double rate_lo = 0.0;
  double rate_hi = 0.0;
  double min_duration = 0.5;
  double max_duration = 2.0;
};

// The first n entries of a fixed table of spectrally separated classes.
inline std::vector<EventClassSpec> default_classes(std::size_t n) {
  static const std::vector<EventClassSpec> table = {
      {"tone", Family::kTone, 400.0, 600.0, 0.0, 0.0},
      {"chirp", Family::kChirp, 1500.0, 3000.0, 0.0, 0.0},
      {"am_tone", Family::kAmTone, 4000.0, 5000.0, 6.0, 12.0},
      {"harmonic", Family::kHarmonic, 150.0, 250.0, 0.0, 0.0},
      {"noise_burst", Family::kNoiseBurst, 5500.0, 7000.0, 0.0, 0.0},
      {"click_train", Family::kClickTrain, 2000.0, 3000.0, 15.0, 30.0},
      {"tone_mid", Family::kTone, 1000.0, 1300.0, 0.0, 0.0},
      {"am_low", Family::kAmTone, 700.0, 900.0, 3.0, 6.0},
  };
  require(n >= 1 && n <= table.size(), ErrorKind::kInvalidArgument,
          "number of synthetic classes must be in [1, " + std::to_string(table.size()) + "]");
  return {table.begin(), table.begin() + static_cast<std::ptrdiff_t>(n)};
}

inline double highest_frequency(const EventClassSpec& spec) {
  return spec.family == Family::kHarmonic ? spec.f_hi * 6.0 : spec.f_hi;
}

namespace detail {

inline void apply_fades(std::vector<double>& x, std::size_t fade) {
  fade = std::min(fade, x.size() / 2);
  for (std::size_t i = 0; i < fade; ++i) {
    const double g = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(fade));
    x[i] *= g;
    x[x.size() - 1 - i] *= g;
  }
}

// RBJ band-pass biquad (constant 0 dB peak gain).
inline void bandpass(std::vector<double>& x, double center, double q, int sample_rate) {
  const double w0 = 2.0 * std::numbers::pi * center / sample_rate;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (double& v : x) {
    const double y = b0 * v + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = v;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

}  // namespace detail

// Deterministic event waveform of the given duration with 10 ms raised-cosine
// fades, scaled to unit RMS over the samples between the fades.
inline Waveform synth_event(const EventClassSpec& spec, std::uint64_t seed, double duration,
                            int sample_rate) {
  require(sample_rate > 0, ErrorKind::kInvalidArgument, "sample rate must be positive");
  require(highest_frequency(spec) < 0.5 * sample_rate, ErrorKind::kInvalidArgument,
          "class '" + spec.name + "' does not fit below Nyquist at " + std::to_string(sample_rate) + " Hz");
  const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
  const std::size_t fade = static_cast<std::size_t>(std::llround(0.01 * sample_rate));
  require(n > 2 * fade, ErrorKind::kInvalidArgument, "event duration too short for its fades");

  Rng rng(derive_seed(seed, 0xE7E27));
  const double sr = sample_rate;
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> x(n, 0.0);
  switch (spec.family) {
    case Family::kTone: {
      const double f = uniform(rng, spec.f_lo, spec.f_hi);
      const double phase = uniform(rng, 0.0, two_pi);
      for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(two_pi * f * i / sr + phase);
      break;
    }
    case Family::kChirp: {
      const double span = spec.f_hi - spec.f_lo;
      double f0 = uniform(rng, spec.f_lo, spec.f_lo + 0.2 * span);
      double f1 = uniform(rng, spec.f_hi - 0.2 * span, spec.f_hi);
      if (uniform01(rng) < 0.5) std::swap(f0, f1);
      const double total = n / sr;
      for (std::size_t i = 0; i < n; ++i) {
        const double t = i / sr;
        x[i] = std::sin(two_pi * (f0 * t + 0.5 * (f1 - f0) * t * t / total));
      }
      break;
    }
    case Family::kAmTone: {
      const double fc = uniform(rng, spec.f_lo, spec.f_hi);
      const double fm = uniform(rng, spec.rate_lo, spec.rate_hi);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = i / sr;
        x[i] = (1.0 + 0.8 * std::sin(two_pi * fm * t)) * std::sin(two_pi * fc * t);
      }
      break;
    }
    case Family::kHarmonic: {
      const double f0 = uniform(rng, spec.f_lo, spec.f_hi);
      for (int h = 1; h <= 6; ++h) {
        const double phase = uniform(rng, 0.0, two_pi);
        for (std::size_t i = 0; i < n; ++i) x[i] += std::sin(two_pi * h * f0 * i / sr + phase) / h;
      }
      break;
    }
    case Family::kNoiseBurst: {
      for (auto& v : x) v = normal(rng);
      const double center = std::sqrt(spec.f_lo * spec.f_hi);
      const double q = center / (spec.f_hi - spec.f_lo);
      detail::bandpass(x, center, q, sample_rate);
      detail::bandpass(x, center, q, sample_rate);
      break;
    }
    case Family::kClickTrain: {
      const double rate = uniform(rng, spec.rate_lo, spec.rate_hi);
      const double f = uniform(rng, spec.f_lo, spec.f_hi);
      const double decay = 0.002 * sr;
      const auto period = static_cast<std::size_t>(sr / rate);
      for (std::size_t start = 0; start < n; start += period) {
        for (std::size_t i = start; i < std::min(n, start + static_cast<std::size_t>(6 * decay)); ++i) {
          const double k = static_cast<double>(i - start);
          x[i] += std::exp(-k / decay) * std::sin(two_pi * f * k / sr);
        }
      }
      break;
    }
  }
  detail::apply_fades(x, fade);
  double energy = 0.0;
  for (std::size_t i = fade; i < n - fade; ++i) energy += x[i] * x[i];
  const double rms = std::sqrt(energy / static_cast<double>(n - 2 * fade));
  require(rms > 0.0, ErrorKind::kNumeric, "synthesized event is silent");
  for (auto& v : x) v /= rms;
  return Waveform{std::move(x), sample_rate};
}

enum class BackgroundKind { kPink, kBrown };

inline std::string to_string(BackgroundKind k) { return k == BackgroundKind::kPink ? "pink" : "brown"; }

// Coloured Gaussian noise shaped in the frequency domain: power ~ 1/f (pink)
// or 1/f^2 (brown) above 10 Hz, no DC. Unit RMS.
inline Waveform synth_background(BackgroundKind kind, std::uint64_t seed, double duration, int sample_rate) {
  require(sample_rate > 0 && duration > 0.0, ErrorKind::kInvalidArgument,
          "background needs positive duration and sample rate");
  const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
  std::size_t size = 1;
  while (size < n) size <<= 1;
  Rng rng(derive_seed(seed, 0xB6B6));
  std::vector<audio::Complex> spec(size);
  const double exponent = kind == BackgroundKind::kPink ? 0.5 : 1.0;
  const double floor_hz = 10.0;
  for (std::size_t k = 1; k <= size / 2; ++k) {
    const double hz = std::max(floor_hz, static_cast<double>(k) * sample_rate / static_cast<double>(size));
    const double gain = std::pow(hz, -exponent);
    const double re = normal(rng), im = k == size / 2 ? 0.0 : normal(rng);
    spec[k] = gain * audio::Complex(re, im);
    if (k != size / 2) spec[size - k] = std::conj(spec[k]);
  }
  audio::FftPlan(size).inverse(spec);
  std::vector<double> x(n);
  double energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = spec[i].real();
    energy += x[i] * x[i];
  }
  const double rms = std::sqrt(energy / static_cast<double>(n));
  for (auto& v : x) v /= rms;
  return Waveform{std::move(x), sample_rate};
}

struct EventPlacement {
  std::size_t class_index = 0;
  std::size_t onset_sample = 0;
  std::size_t length = 0;
  std::uint64_t seed = 0;
};

struct ClipRecipe {
  std::size_t clip_samples = 0;
  BackgroundKind background = BackgroundKind::kPink;
  std::uint64_t background_seed = 0;
  std::vector<EventPlacement> events;
  double snr_db = 0.0;
};

struct MixedClip {
  Waveform mixture;
  Waveform background;
  // Each source is full clip length, zero outside its event.
  std::vector<Waveform> sources;
  std::vector<EventAnnotation> events;
  std::vector<int> weak_labels;
};

inline double mean_power(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return x.empty() ? 0.0 : e / static_cast<double>(x.size());
}

// Mixes the recipe's events into its background. Every event is scaled so
// that 10 log10(P_event / P_background) = snr_db over the event's active
// interval. If the mixture would exceed 0.9 in magnitude, all components are
// attenuated by one common gain, which preserves both the SNRs and the
// additivity mixture = background + sum(sources).
inline MixedClip mix_clip(const ClipRecipe& recipe, const std::vector<EventClassSpec>& classes,
                          int sample_rate) {
  require(recipe.clip_samples > 0, ErrorKind::kInvalidArgument, "clip length must be positive");
  std::vector<EventPlacement> sorted = recipe.events;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.onset_sample < b.onset_sample; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    require(sorted[i].class_index < classes.size(), ErrorKind::kInvalidArgument, "event class out of range");
    require(sorted[i].length > 0 && sorted[i].onset_sample + sorted[i].length <= recipe.clip_samples,
            ErrorKind::kInvalidArgument, "event placement out of clip bounds");
    if (i > 0) {
      require(sorted[i - 1].onset_sample + sorted[i - 1].length <= sorted[i].onset_sample,
              ErrorKind::kInvalidArgument, "events overlap in time");
    }
  }

  const double sr = sample_rate;
  MixedClip clip;
  clip.background = synth_background(recipe.background, recipe.background_seed,
                                     static_cast<double>(recipe.clip_samples) / sr, sample_rate);
  clip.background.samples.resize(recipe.clip_samples);
  clip.mixture = clip.background;
  clip.weak_labels.assign(classes.size(), 0);

  for (const auto& place : recipe.events) {
    Waveform ev = synth_event(classes[place.class_index], place.seed,
                              static_cast<double>(place.length) / sr, sample_rate);
    ev.samples.resize(place.length);
    const std::span<const double> bg(clip.background.samples.data() + place.onset_sample, place.length);
    const double gain = std::sqrt(mean_power(bg) * std::pow(10.0, recipe.snr_db / 10.0) / mean_power(ev.samples));
    Waveform source{std::vector<double>(recipe.clip_samples, 0.0), sample_rate};
    for (std::size_t i = 0; i < place.length; ++i) source.samples[place.onset_sample + i] = gain * ev.samples[i];
    for (std::size_t i = 0; i < recipe.clip_samples; ++i) clip.mixture.samples[i] += source.samples[i];
    clip.sources.push_back(std::move(source));
    clip.events.push_back({place.class_index, place.onset_sample / sr,
                           static_cast<double>(place.onset_sample + place.length) / sr});
    clip.weak_labels[place.class_index] = 1;
  }

  double peak = 0.0;
  for (double v : clip.mixture.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.9) {
    const double g = 0.9 / peak;
    for (auto& v : clip.mixture.samples) v *= g;
    for (auto& v : clip.background.samples) v *= g;
    for (auto& s : clip.sources) {
      for (auto& v : s.samples) v *= g;
    }
  }
  return clip;
}

struct DatasetConfig {
  std::size_t n_classes = 4;
  std::size_t n_clips = 100;
  std::vector<double> snr_db = {0.0};
  int folds = 4;
  std::uint64_t seed = 0;
  int sample_rate = 16000;
  double clip_seconds = 5.0;
  std::size_t events_per_clip = 3;
};

inline nlohmann::json config_json(const DatasetConfig& c) {
  return {{"n_classes", c.n_classes}, {"n_clips", c.n_clips},       {"snr_db", c.snr_db},
          {"folds", c.folds},         {"seed", c.seed},             {"sample_rate", c.sample_rate},
          {"clip_seconds", c.clip_seconds}, {"events_per_clip", c.events_per_clip}};
}

// Recipe for clip `index`, derived only from (seed, index). Classes are drawn
// uniformly with replacement; durations uniformly within the class range;
// the free time is split by sorted uniform points so events never overlap.
inline ClipRecipe random_recipe(const DatasetConfig& config, const std::vector<EventClassSpec>& classes,
                                std::size_t index) {
  require(!config.snr_db.empty(), ErrorKind::kInvalidArgument, "at least one SNR is required");
  Rng rng(derive_seed(config.seed, index));
  const double sr = config.sample_rate;
  ClipRecipe r;
  r.clip_samples = static_cast<std::size_t>(std::llround(config.clip_seconds * sr));
  r.background = uniform01(rng) < 0.5 ? BackgroundKind::kPink : BackgroundKind::kBrown;
  r.background_seed = rng();
  r.snr_db = config.snr_db[uniform_index(rng, config.snr_db.size())];

  // Durations are redrawn until all events fit in the clip.
  std::size_t total = 0;
  for (int attempt = 0;; ++attempt) {
    require(attempt < 1000, ErrorKind::kInvalidArgument, "events do not fit in the clip");
    r.events.clear();
    total = 0;
    for (std::size_t e = 0; e < config.events_per_clip; ++e) {
      EventPlacement p;
      p.class_index = static_cast<std::size_t>(uniform_index(rng, classes.size()));
      const auto& spec = classes[p.class_index];
      p.length = static_cast<std::size_t>(std::llround(uniform(rng, spec.min_duration, spec.max_duration) * sr));
      p.seed = rng();
      total += p.length;
      r.events.push_back(p);
    }
    if (total <= r.clip_samples) break;
  }
  const std::size_t free = r.clip_samples - total;
  std::vector<std::size_t> cuts(r.events.size());
  for (auto& c : cuts) c = static_cast<std::size_t>(uniform_index(rng, free + 1));
  std::sort(cuts.begin(), cuts.end());
  std::size_t used = 0;
  for (std::size_t e = 0; e < r.events.size(); ++e) {
    r.events[e].onset_sample = cuts[e] + used;
    used += r.events[e].length;
  }
  return r;
}

inline std::string clip_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "clip_%05zu", index);
  return buf;
}

// Writes audio/<clip>.wav mixtures, sources/<clip>__<i>_<label>.wav event
// excerpts and manifest.jsonl under out_dir. Fold = clip index mod folds.
inline Manifest make_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir) {
  require(config.folds >= 1, ErrorKind::kInvalidArgument, "folds must be >= 1");
  require(config.n_clips >= 1, ErrorKind::kInvalidArgument, "clips must be >= 1");
  const auto classes = default_classes(config.n_classes);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "audio", ec);
  std::filesystem::create_directories(out_dir / "sources", ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + out_dir.string() + ": " + ec.message());

  Manifest manifest;
  manifest.base_dir = out_dir;
  for (std::size_t i = 0; i < config.n_clips; ++i) {
    const ClipRecipe recipe = random_recipe(config, classes, i);
    const MixedClip clip = mix_clip(recipe, classes, config.sample_rate);
    ManifestEntry entry;
    entry.clip_id = clip_name(i);
    entry.mixture = "audio/" + entry.clip_id + ".wav";
    entry.fold = static_cast<int>(i % static_cast<std::size_t>(config.folds));
    entry.snr_db = recipe.snr_db;
    audio::write_wav(out_dir / entry.mixture, clip.mixture, audio::SampleFormat::kFloat32);
    for (std::size_t e = 0; e < clip.events.size(); ++e) {
      const auto& place = recipe.events[e];
      const std::string label = classes[place.class_index].name;
      ManifestEvent ev{label, clip.events[e].onset, clip.events[e].offset,
                       "sources/" + entry.clip_id + "__" + std::to_string(e) + "_" + label + ".wav"};
      Waveform excerpt{{clip.sources[e].samples.begin() + static_cast<std::ptrdiff_t>(place.onset_sample),
                        clip.sources[e].samples.begin() + static_cast<std::ptrdiff_t>(place.onset_sample + place.length)},
                       config.sample_rate};
      audio::write_wav(out_dir / ev.source, excerpt, audio::SampleFormat::kFloat32);
      entry.events.push_back(std::move(ev));
    }
    manifest.entries.push_back(std::move(entry));
  }
  write_manifest(out_dir / "manifest.jsonl", manifest.entries);
  return manifest;
}

}  // namespace wsed::datagen
