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
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <unistd.h>

#include "wsed/audio/wav.hpp"
#include "wsed/manifest.hpp"
#include "wsed/random.hpp"

namespace wsed::testing {

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = uniform(rng, lo, hi);
  return v;
}

inline double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double rel_l2(std::span<const double> got, std::span<const double> want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    num += (got[i] - want[i]) * (got[i] - want[i]);
    den += want[i] * want[i];
  }
  return std::sqrt(num / den);
}

inline double normalized_correlation(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

inline audio::Waveform sine(double hz, double seconds, int sr, double amp = 1.0) {
  const auto n = static_cast<std::size_t>(std::llround(seconds * sr));
  audio::Waveform w{std::vector<double>(n), sr};
  for (std::size_t i = 0; i < n; ++i) w.samples[i] = amp * std::sin(2.0 * M_PI * hz * static_cast<double>(i) / sr);
  return w;
}

// Fresh empty directory under the system temp dir, unique per process.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("wsed_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Maximum one-to-one matching size between refs and ests where `ok(r, e)`
// says a pair may match; exhaustive search, for small instances only.
inline std::size_t max_matching(std::size_t n_ref, std::size_t n_est,
                                const std::function<bool(std::size_t, std::size_t)>& ok) {
  std::vector<bool> used(n_est, false);
  std::function<std::size_t(std::size_t)> best = [&](std::size_t r) -> std::size_t {
    if (r == n_ref) return 0;
    std::size_t b = best(r + 1);
    for (std::size_t e = 0; e < n_est; ++e) {
      if (used[e] || !ok(r, e)) continue;
      used[e] = true;
      b = std::max(b, 1 + best(r + 1));
      used[e] = false;
    }
    return b;
  };
  return best(0);
}

}  // namespace wsed::testing
