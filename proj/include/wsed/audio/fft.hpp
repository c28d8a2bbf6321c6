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

#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "wsed/error.hpp"

namespace wsed::audio {

using Complex = std::complex<double>;

// In-place complex DFT of a fixed size. Power-of-two sizes use an iterative
// radix-2 transform; any other size falls back to a direct O(n^2) sum.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n), twiddle_(n) {
    require(n >= 1, ErrorKind::kInvalidArgument, "FFT size must be positive");
    for (std::size_t k = 0; k < n; ++k) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle_[k] = Complex(std::cos(angle), std::sin(angle));
    }
    pow2_ = (n & (n - 1)) == 0;
    if (pow2_) {
      bitrev_.resize(n);
      std::size_t bits = 0;
      while ((std::size_t{1} << bits) < n) ++bits;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = 0;
        for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1) << (bits - 1 - b);
        bitrev_[i] = r;
      }
    }
  }

  std::size_t size() const { return n_; }

  void forward(std::span<Complex> data) const { transform(data, false); }

  // Unnormalized inverse: forward(inverse(x)) == n * x.
  void inverse(std::span<Complex> data) const { transform(data, true); }

 private:
  void transform(std::span<Complex> data, bool inverse) const {
    require(data.size() == n_, ErrorKind::kShape, "FFT buffer size mismatch");
    if (pow2_) {
      radix2(data, inverse);
    } else {
      direct(data, inverse);
    }
  }

  Complex twiddle(std::size_t k, bool inverse) const {
    return inverse ? std::conj(twiddle_[k]) : twiddle_[k];
  }

  void radix2(std::span<Complex> a, bool inverse) const {
    for (std::size_t i = 0; i < n_; ++i) {
      if (i < bitrev_[i]) std::swap(a[i], a[bitrev_[i]]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t stride = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t j = 0; j < half; ++j) {
          const Complex w = twiddle(j * stride, inverse);
          const Complex u = a[start + j];
          const Complex v = a[start + j + half] * w;
          a[start + j] = u + v;
          a[start + j + half] = u - v;
        }
      }
    }
  }

  void direct(std::span<Complex> a, bool inverse) const {
    std::vector<Complex> out(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      Complex acc = 0.0;
      for (std::size_t t = 0; t < n_; ++t) acc += a[t] * twiddle((k * t) % n_, inverse);
      out[k] = acc;
    }
    std::copy(out.begin(), out.end(), a.begin());
  }

  std::size_t n_;
  bool pow2_ = false;
  std::vector<Complex> twiddle_;
  std::vector<std::size_t> bitrev_;
};

}  // namespace wsed::audio
