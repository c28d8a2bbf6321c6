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
#include <span>
#include <vector>

#include "wsed/audio/mel.hpp"
#include "wsed/audio/stft.hpp"
#include "wsed/audio/wav.hpp"
#include "wsed/error.hpp"

namespace wsed::sep {

// T x F mask on the linear STFT grid, row-major by frame.
struct LinearMask {
  std::vector<double> values;
  std::size_t num_frames = 0;
  std::size_t num_bins = 0;

  double at(std::size_t t, std::size_t f) const { return values[t * num_bins + f]; }
};

// Masked magnitudes, T x F.
struct SegmentedSpectrogram {
  std::vector<double> magnitudes;
  std::size_t num_frames = 0;
  std::size_t num_bins = 0;
};

// Per frame, linear interpolation of the mel mask across band-centre
// frequencies, evaluated at each linear bin; constant beyond the outer centres.
template <typename V>
LinearMask upsample_mask(std::span<const V> mask, std::size_t num_frames, const audio::MelFilterbank& fb) {
  const std::size_t M = fb.n_mels;
  require(mask.size() == num_frames * M, ErrorKind::kShape,
          "mask size does not match frames x " + std::to_string(M) + " mel bins");
  LinearMask out;
  out.num_frames = num_frames;
  out.num_bins = fb.num_bins;
  out.values.resize(num_frames * fb.num_bins);

  // For every linear bin: left centre index and interpolation weight.
  std::vector<std::size_t> left(fb.num_bins);
  std::vector<double> frac(fb.num_bins);
  const auto& c = fb.band_centers;
  for (std::size_t f = 0; f < fb.num_bins; ++f) {
    const double hz = fb.bin_frequency(f);
    if (M == 1 || hz <= c.front()) {
      left[f] = 0;
      frac[f] = 0.0;
    } else if (hz >= c.back()) {
      left[f] = M - 2;
      frac[f] = 1.0;
    } else {
      const auto it = std::upper_bound(c.begin(), c.end(), hz);
      const auto j = static_cast<std::size_t>(it - c.begin()) - 1;
      left[f] = j;
      frac[f] = (hz - c[j]) / (c[j + 1] - c[j]);
    }
  }
  for (std::size_t t = 0; t < num_frames; ++t) {
    const V* row = mask.data() + t * M;
    double* dst = out.values.data() + t * fb.num_bins;
    for (std::size_t f = 0; f < fb.num_bins; ++f) {
      if (M == 1) {
        dst[f] = static_cast<double>(row[0]);
        continue;
      }
      const double a = static_cast<double>(row[left[f]]);
      const double b = static_cast<double>(row[left[f] + 1]);
      dst[f] = a + frac[f] * (b - a);
    }
  }
  return out;
}

inline void require_same_grid(const LinearMask& mask, const audio::ComplexSpectrogram& spec) {
  require(mask.num_frames == spec.num_frames && mask.num_bins == spec.num_bins, ErrorKind::kShape,
          "mask is " + std::to_string(mask.num_frames) + "x" + std::to_string(mask.num_bins) +
              ", spectrogram is " + std::to_string(spec.num_frames) + "x" + std::to_string(spec.num_bins));
}

// Y = mask * |X| elementwise.
inline SegmentedSpectrogram apply_mask(const LinearMask& mask, const audio::ComplexSpectrogram& spec) {
  require_same_grid(mask, spec);
  SegmentedSpectrogram out;
  out.num_frames = spec.num_frames;
  out.num_bins = spec.num_bins;
  out.magnitudes.resize(spec.values.size());
  for (std::size_t i = 0; i < spec.values.size(); ++i) out.magnitudes[i] = mask.values[i] * std::abs(spec.values[i]);
  return out;
}

// Magnitudes combined with the phase of `phase_source`, then inverse STFT.
inline audio::Waveform synthesize(const SegmentedSpectrogram& segmented, const audio::ComplexSpectrogram& phase_source) {
  require(segmented.num_frames == phase_source.num_frames && segmented.num_bins == phase_source.num_bins,
          ErrorKind::kShape, "segmented spectrogram does not match the phase source");
  audio::ComplexSpectrogram spec = phase_source;
  for (std::size_t i = 0; i < spec.values.size(); ++i) {
    const double phase = std::arg(phase_source.values[i]);
    spec.values[i] = std::polar(segmented.magnitudes[i], phase);
  }
  return audio::istft(spec);
}

// |S| / max(|X|, eps), clipped to [0, 1].
inline LinearMask ideal_ratio_mask(const audio::ComplexSpectrogram& event, const audio::ComplexSpectrogram& mixture,
                                   double eps = 1e-8) {
  require(event.num_frames == mixture.num_frames && event.num_bins == mixture.num_bins, ErrorKind::kShape,
          "event and mixture spectrograms differ in size");
  require(eps > 0.0, ErrorKind::kInvalidArgument, "eps must be positive");
  LinearMask out;
  out.num_frames = mixture.num_frames;
  out.num_bins = mixture.num_bins;
  out.values.resize(mixture.values.size());
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double r = std::abs(event.values[i]) / std::max(std::abs(mixture.values[i]), eps);
    out.values[i] = std::clamp(r, 0.0, 1.0);
  }
  return out;
}

// Filterbank-weighted average of a linear mask onto the mel grid:
//   out[t][m] = sum_f w[m][f] mask[t][f] / sum_f w[m][f].
inline std::vector<double> mel_average(const LinearMask& mask, const audio::MelFilterbank& fb) {
  require(mask.num_bins == fb.num_bins, ErrorKind::kShape, "mask bins do not match the filterbank");
  std::vector<double> norm(fb.n_mels, 0.0);
  for (std::size_t m = 0; m < fb.n_mels; ++m) {
    for (std::size_t f = 0; f < fb.num_bins; ++f) norm[m] += fb.weight(m, f);
  }
  std::vector<double> out(mask.num_frames * fb.n_mels, 0.0);
  for (std::size_t t = 0; t < mask.num_frames; ++t) {
    for (std::size_t m = 0; m < fb.n_mels; ++m) {
      double s = 0.0;
      for (std::size_t f = 0; f < fb.num_bins; ++f) s += fb.weight(m, f) * mask.at(t, f);
      out[t * fb.n_mels + m] = s / norm[m];
    }
  }
  return out;
}

// Mel mask in, separated waveform out.
template <typename V>
audio::Waveform separate(std::span<const V> mel_mask, const audio::ComplexSpectrogram& mixture,
                         const audio::MelFilterbank& fb) {
  const auto linear = upsample_mask(mel_mask, mixture.num_frames, fb);
  return synthesize(apply_mask(linear, mixture), mixture);
}

}  // namespace wsed::sep
