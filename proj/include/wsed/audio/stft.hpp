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
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "wsed/audio/fft.hpp"
#include "wsed/audio/wav.hpp"
#include "wsed/error.hpp"

namespace wsed::audio {

// Periodic Hann window. With hop = size / 2 the squared-window envelope is
// bounded below by 0.5 away from the signal edges.
inline std::vector<double> hann_window(std::size_t size) {
  std::vector<double> w(size);
  for (std::size_t n = 0; n < size; ++n) {
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                static_cast<double>(size));
  }
  return w;
}

// T x F complex frames, row-major by frame. F = window_size / 2 + 1.
struct ComplexSpectrogram {
  std::vector<Complex> values;
  std::size_t num_frames = 0;
  std::size_t num_bins = 0;
  int sample_rate = 0;
  std::size_t window_size = 0;
  std::size_t hop = 0;
  // Length of the analysed signal; istft pads its output to this length.
  std::size_t signal_length = 0;

  Complex& at(std::size_t t, std::size_t f) { return values[t * num_bins + f]; }
  const Complex& at(std::size_t t, std::size_t f) const { return values[t * num_bins + f]; }
  std::span<const Complex> frame(std::size_t t) const {
    return {values.data() + t * num_bins, num_bins};
  }
};

inline std::size_t frame_count(std::size_t num_samples, std::size_t window_size, std::size_t hop) {
  if (num_samples < window_size) return 0;
  return (num_samples - window_size) / hop + 1;
}

inline ComplexSpectrogram stft(const Waveform& wave, std::size_t window_size, std::size_t hop,
                               std::span<const double> window) {
  require(window_size >= 2 && window_size % 2 == 0, ErrorKind::kInvalidArgument,
          "window size must be even and >= 2");
  require(hop >= 1, ErrorKind::kInvalidArgument, "hop must be positive");
  require(window.size() == window_size, ErrorKind::kShape,
          "window function must be tabulated over window_size points");
  require(wave.samples.size() >= window_size, ErrorKind::kInvalidArgument,
          "signal shorter than one window (" + std::to_string(wave.samples.size()) + " < " +
              std::to_string(window_size) + " samples)");

  ComplexSpectrogram spec;
  spec.num_frames = frame_count(wave.samples.size(), window_size, hop);
  spec.num_bins = window_size / 2 + 1;
  spec.sample_rate = wave.sample_rate;
  spec.window_size = window_size;
  spec.hop = hop;
  spec.signal_length = wave.samples.size();
  spec.values.resize(spec.num_frames * spec.num_bins);

  const FftPlan plan(window_size);
  std::vector<Complex> buffer(window_size);
  for (std::size_t t = 0; t < spec.num_frames; ++t) {
    const double* segment = wave.samples.data() + t * hop;
    for (std::size_t n = 0; n < window_size; ++n) buffer[n] = segment[n] * window[n];
    plan.forward(buffer);
    std::copy_n(buffer.begin(), spec.num_bins, spec.values.begin() + t * spec.num_bins);
  }
  return spec;
}

inline ComplexSpectrogram stft(const Waveform& wave, std::size_t window_size, std::size_t hop) {
  const auto window = hann_window(window_size);
  return stft(wave, window_size, hop, window);
}

// Inverse STFT: per-frame inverse DFT (Hermitian completion of the retained
// bins), synthesis windowing, overlap-add, then division by the accumulated
// squared-window envelope. Samples where the envelope vanishes are left at 0.
inline Waveform istft(const ComplexSpectrogram& spec, std::span<const double> window) {
  const std::size_t n = spec.window_size;
  require(window.size() == n, ErrorKind::kShape, "window length does not match spectrogram");
  require(n >= 2 && spec.num_bins == n / 2 + 1, ErrorKind::kShape,
          "frame length inconsistent with window size");
  require(spec.values.size() == spec.num_frames * spec.num_bins, ErrorKind::kShape,
          "spectrogram storage does not match its dimensions");
  require(spec.hop >= 1 && spec.hop <= n, ErrorKind::kInvalidArgument, "hop must be in [1, window]");

  Waveform out;
  out.sample_rate = spec.sample_rate;
  if (spec.num_frames == 0) {
    out.samples.assign(spec.signal_length, 0.0);
    return out;
  }
  const std::size_t covered = (spec.num_frames - 1) * spec.hop + n;
  std::vector<double> signal(covered, 0.0);
  std::vector<double> envelope(covered, 0.0);

  const FftPlan plan(n);
  std::vector<Complex> buffer(n);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t t = 0; t < spec.num_frames; ++t) {
    const auto frame = spec.frame(t);
    for (std::size_t f = 0; f < spec.num_bins; ++f) buffer[f] = frame[f];
    for (std::size_t f = spec.num_bins; f < n; ++f) buffer[f] = std::conj(frame[n - f]);
    plan.inverse(buffer);
    const std::size_t offset = t * spec.hop;
    for (std::size_t i = 0; i < n; ++i) {
      signal[offset + i] += buffer[i].real() * scale * window[i];
      envelope[offset + i] += window[i] * window[i];
    }
  }
  out.samples.assign(std::max(covered, spec.signal_length), 0.0);
  for (std::size_t i = 0; i < covered; ++i) {
    if (envelope[i] > 1e-10) out.samples[i] = signal[i] / envelope[i];
  }
  return out;
}

inline Waveform istft(const ComplexSpectrogram& spec) {
  const auto window = hann_window(spec.window_size);
  return istft(spec, window);
}

}  // namespace wsed::audio
