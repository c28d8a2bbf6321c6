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
#include <string>
#include <vector>

#include "wsed/audio/stft.hpp"
#include "wsed/error.hpp"

namespace wsed::audio {

// HTK-style mel scale.
inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

struct MelFilterbank {
  // n_mels x num_bins, row-major.
  std::vector<double> weights;
  std::vector<double> band_centers;
  std::size_t n_mels = 0;
  std::size_t num_bins = 0;
  int sample_rate = 0;
  std::size_t window_size = 0;

  double weight(std::size_t m, std::size_t f) const { return weights[m * num_bins + f]; }
  double bin_frequency(std::size_t f) const {
    return static_cast<double>(f) * sample_rate / static_cast<double>(window_size);
  }
};

// Triangular filters peaking at n_mels centres equally spaced in mel between
// f_min and f_max. Filter m rises linearly from centre m-1 (f_min for the
// first) to its own centre and falls to centre m+1 (f_max for the last).
inline MelFilterbank mel_filterbank(int sample_rate, std::size_t window_size, std::size_t n_mels,
                                    double f_min, double f_max) {
  require(sample_rate > 0, ErrorKind::kInvalidArgument, "sample rate must be positive");
  require(window_size >= 2 && window_size % 2 == 0, ErrorKind::kInvalidArgument,
          "window size must be even");
  require(n_mels >= 1, ErrorKind::kInvalidArgument, "n_mels must be >= 1");
  require(0.0 <= f_min && f_min < f_max && f_max <= sample_rate / 2.0, ErrorKind::kInvalidArgument,
          "mel band limits must satisfy 0 <= f_min < f_max <= sample_rate / 2");

  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.num_bins = window_size / 2 + 1;
  fb.sample_rate = sample_rate;
  fb.window_size = window_size;
  fb.weights.assign(n_mels * fb.num_bins, 0.0);

  const double mel_lo = hz_to_mel(f_min);
  const double mel_hi = hz_to_mel(f_max);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(n_mels + 1));
  }
  fb.band_centers.assign(edges.begin() + 1, edges.end() - 1);

  for (std::size_t m = 0; m < n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    bool any = false;
    for (std::size_t f = 0; f < fb.num_bins; ++f) {
      const double hz = fb.bin_frequency(f);
      double w = 0.0;
      if (hz > left && hz <= center) {
        w = (hz - left) / (center - left);
      } else if (hz > center && hz < right) {
        w = (right - hz) / (right - center);
      }
      if (w > 0.0) {
        fb.weights[m * fb.num_bins + f] = w;
        any = true;
      }
    }
    if (!any) {
      fail(ErrorKind::kInvalidArgument,
           "too many mel bands for the frequency resolution: band " + std::to_string(m) +
               " covers no linear bin");
    }
  }
  return fb;
}

struct LogMelSpectrogram {
  // T x n_mels, row-major by frame.
  std::vector<double> values;
  std::size_t num_frames = 0;
  std::size_t n_mels = 0;
  double frame_rate = 0.0;

  double at(std::size_t t, std::size_t m) const { return values[t * n_mels + m]; }
};

// values[t][m] = ln(max(sum_f w[m][f] * |X[t][f]|^2, log_floor)).
inline LogMelSpectrogram log_mel(const ComplexSpectrogram& spec, const MelFilterbank& fb,
                                 double log_floor = 1e-10) {
  require(fb.num_bins == spec.num_bins, ErrorKind::kShape,
          "filterbank has " + std::to_string(fb.num_bins) + " bins, spectrogram has " +
              std::to_string(spec.num_bins));
  require(log_floor > 0.0, ErrorKind::kInvalidArgument, "log floor must be positive");

  LogMelSpectrogram out;
  out.num_frames = spec.num_frames;
  out.n_mels = fb.n_mels;
  out.frame_rate = static_cast<double>(spec.sample_rate) / static_cast<double>(spec.hop);
  out.values.resize(out.num_frames * out.n_mels);

  std::vector<double> power(spec.num_bins);
  for (std::size_t t = 0; t < spec.num_frames; ++t) {
    const auto frame = spec.frame(t);
    for (std::size_t f = 0; f < spec.num_bins; ++f) power[f] = std::norm(frame[f]);
    for (std::size_t m = 0; m < fb.n_mels; ++m) {
      const double* w = fb.weights.data() + m * fb.num_bins;
      double energy = 0.0;
      for (std::size_t f = 0; f < spec.num_bins; ++f) energy += w[f] * power[f];
      out.values[t * out.n_mels + m] = std::log(std::max(energy, log_floor));
    }
  }
  return out;
}

}  // namespace wsed::audio
