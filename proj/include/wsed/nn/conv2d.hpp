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

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "wsed/error.hpp"
#include "wsed/nn/tensor.hpp"
#include "wsed/random.hpp"

namespace wsed::nn {

// Same-padded, stride-1 2-D cross-correlation over (time, freq) with bias.
// Kernels are square with odd size (1 or 3 in the segmentation network).
template <typename T>
class Conv2d {
 public:
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;

  Conv2d() = default;
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel)
      : in_(in_channels), out_(out_channels), k_(kernel) {
    require(in_ >= 1 && out_ >= 1, ErrorKind::kInvalidArgument, "conv channels must be >= 1");
    require(k_ == 1 || k_ == 3, ErrorKind::kInvalidArgument, "conv kernel must be 1x1 or 3x3");
    weight.assign(out_ * in_ * k_ * k_, T(0));
    bias.assign(out_, T(0));
    grad_weight.assign(weight.size(), T(0));
    grad_bias.assign(bias.size(), T(0));
  }

  std::size_t in_channels() const { return in_; }
  std::size_t out_channels() const { return out_; }
  std::size_t kernel() const { return k_; }
  std::size_t patch() const { return in_ * k_ * k_; }

  // Glorot-uniform weights, zero bias.
  void init(Rng& rng) {
    const double fan_in = static_cast<double>(in_ * k_ * k_);
    const double fan_out = static_cast<double>(out_ * k_ * k_);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& w : weight) w = static_cast<T>(uniform(rng, -limit, limit));
    std::fill(bias.begin(), bias.end(), T(0));
  }

  Tensor4<T> forward(Tensor4<T> input) {
    input_ = std::move(input);
    const Tensor4<T>& x = input_;
    const Shape4& s = x.shape();
    require(s.channels == in_, ErrorKind::kShape,
            "conv expects " + std::to_string(in_) + " input channels, got " +
                std::to_string(s.channels));
    Tensor4<T> y(s.batch, out_, s.time, s.freq);
    const std::size_t hw = s.plane();
    ConstMatrixMap w(weight.data(), out_, patch());
    for (std::size_t n = 0; n < s.batch; ++n) {
      MatrixMap out(y.data() + y.index(n, 0, 0, 0), out_, hw);
      if (k_ == 1) {
        out.noalias() = w * ConstMatrixMap(x.data() + x.index(n, 0, 0, 0), in_, hw);
      } else {
        for (std::size_t t0 = 0; t0 < s.time; t0 += kTileFrames) {
          const std::size_t t1 = std::min(s.time, t0 + kTileFrames);
          const std::size_t cols = (t1 - t0) * s.freq;
          im2col(x, n, t0, t1);
          out.middleCols(t0 * s.freq, cols).noalias() = w * ConstMatrixMap(cols_.data(), patch(), cols);
        }
      }
      for (std::size_t o = 0; o < out_; ++o) out.row(o).array() += bias[o];
    }
    return y;
  }

  // Accumulates weight/bias gradients and returns the input gradient.
  Tensor4<T> backward(const Tensor4<T>& grad_out) {
    const Shape4& s = input_.shape();
    require(grad_out.shape() == Shape4{s.batch, out_, s.time, s.freq}, ErrorKind::kShape,
            "conv backward gradient shape mismatch");
    Tensor4<T> grad_in(s);
    const std::size_t hw = s.plane();
    ConstMatrixMap w(weight.data(), out_, patch());
    MatrixMap gw(grad_weight.data(), out_, patch());
    for (std::size_t n = 0; n < s.batch; ++n) {
      ConstMatrixMap go(grad_out.data() + grad_out.index(n, 0, 0, 0), out_, hw);
      for (std::size_t o = 0; o < out_; ++o) {
        const T* row = grad_out.data() + grad_out.index(n, o, 0, 0);
        grad_bias[o] += static_cast<T>(lane_sum<T>(hw, [&](std::size_t i) { return row[i]; }));
      }
      if (k_ == 1) {
        ConstMatrixMap in(input_.data() + input_.index(n, 0, 0, 0), in_, hw);
        gw.noalias() += go * in.transpose();
        MatrixMap gi(grad_in.data() + grad_in.index(n, 0, 0, 0), in_, hw);
        gi.noalias() = w.transpose() * go;
      } else {
        for (std::size_t t0 = 0; t0 < s.time; t0 += kTileFrames) {
          const std::size_t t1 = std::min(s.time, t0 + kTileFrames);
          const std::size_t width = (t1 - t0) * s.freq;
          const auto go_tile = go.middleCols(t0 * s.freq, width);
          im2col(input_, n, t0, t1);
          ConstMatrixMap cols(cols_.data(), patch(), width);
          gw.noalias() += go_tile * cols.transpose();
          grad_cols_.resize(patch() * width);
          MatrixMap gc(grad_cols_.data(), patch(), width);
          gc.noalias() = w.transpose() * go_tile;
          col2im(grad_in, n, t0, t1);
        }
      }
    }
    return grad_in;
  }

  void zero_grad() {
    std::fill(grad_weight.begin(), grad_weight.end(), T(0));
    std::fill(grad_bias.begin(), grad_bias.end(), T(0));
  }

  // Releases cached activations.
  void clear_cache() {
    input_ = Tensor4<T>();
    cols_.clear();
    cols_.shrink_to_fit();
    grad_cols_.clear();
    grad_cols_.shrink_to_fit();
  }

  std::vector<T> weight;
  std::vector<T> bias;
  std::vector<T> grad_weight;
  std::vector<T> grad_bias;

 private:
  // Output frames per im2col tile; keeps the column buffer cache-resident.
  static constexpr std::size_t kTileFrames = 16;

  // cols[(c*k + ky)*k + kx][(t - t0)*F + f] = x[n, c, t + ky - pad, f + kx - pad]
  // for t in [t0, t1), zero outside the input.
  void im2col(const Tensor4<T>& x, std::size_t n, std::size_t t0, std::size_t t1) {
    const Shape4& s = x.shape();
    const std::size_t hw = (t1 - t0) * s.freq;
    const auto pad = static_cast<std::ptrdiff_t>(k_ / 2);
    const auto H = static_cast<std::ptrdiff_t>(s.time);
    const auto W = static_cast<std::ptrdiff_t>(s.freq);
    cols_.resize(patch() * hw);
    std::size_t row = 0;
    for (std::size_t c = 0; c < in_; ++c) {
      const T* src = x.data() + x.index(n, c, 0, 0);
      for (std::size_t ky = 0; ky < k_; ++ky) {
        for (std::size_t kx = 0; kx < k_; ++kx, ++row) {
          T* dst = cols_.data() + row * hw;
          const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
          for (auto t = static_cast<std::ptrdiff_t>(t0); t < static_cast<std::ptrdiff_t>(t1); ++t) {
            T* d = dst + (t - static_cast<std::ptrdiff_t>(t0)) * W;
            const std::ptrdiff_t st = t + dy;
            if (st < 0 || st >= H) {
              std::fill(d, d + W, T(0));
              continue;
            }
            const T* srow = src + st * W;
            const std::ptrdiff_t f_lo = std::max<std::ptrdiff_t>(0, -dx);
            const std::ptrdiff_t f_hi = std::min<std::ptrdiff_t>(W, W - dx);
            std::fill(d, d + f_lo, T(0));
            std::copy(srow + f_lo + dx, srow + f_hi + dx, d + f_lo);
            std::fill(d + f_hi, d + W, T(0));
          }
        }
      }
    }
  }

  void col2im(Tensor4<T>& grad_in, std::size_t n, std::size_t t0, std::size_t t1) const {
    const Shape4& s = grad_in.shape();
    const std::size_t hw = (t1 - t0) * s.freq;
    const auto pad = static_cast<std::ptrdiff_t>(k_ / 2);
    const auto H = static_cast<std::ptrdiff_t>(s.time);
    const auto W = static_cast<std::ptrdiff_t>(s.freq);
    std::size_t row = 0;
    for (std::size_t c = 0; c < in_; ++c) {
      T* dst = grad_in.data() + grad_in.index(n, c, 0, 0);
      for (std::size_t ky = 0; ky < k_; ++ky) {
        for (std::size_t kx = 0; kx < k_; ++kx, ++row) {
          const T* src = grad_cols_.data() + row * hw;
          const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
          for (auto t = static_cast<std::ptrdiff_t>(t0); t < static_cast<std::ptrdiff_t>(t1); ++t) {
            const std::ptrdiff_t st = t + dy;
            if (st < 0 || st >= H) continue;
            const T* srow = src + (t - static_cast<std::ptrdiff_t>(t0)) * W;
            T* drow = dst + st * W;
            const std::ptrdiff_t f_lo = std::max<std::ptrdiff_t>(0, -dx);
            const std::ptrdiff_t f_hi = std::min<std::ptrdiff_t>(W, W - dx);
            for (std::ptrdiff_t f = f_lo; f < f_hi; ++f) drow[f + dx] += srow[f];
          }
        }
      }
    }
  }

  std::size_t in_ = 0;
  std::size_t out_ = 0;
  std::size_t k_ = 0;
  Tensor4<T> input_;
  std::vector<T> cols_;
  std::vector<T> grad_cols_;
};

}  // namespace wsed::nn
