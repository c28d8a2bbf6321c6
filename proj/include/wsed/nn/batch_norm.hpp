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
#include <cmath>
#include <string>
#include <vector>

#include "wsed/error.hpp"
#include "wsed/nn/tensor.hpp"

namespace wsed::nn {

enum class Mode { kTrain, kEval };

// Per-channel batch normalization over (batch, time, freq).
//
// Train mode normalizes with the biased batch variance and folds the batch
// statistics into the running estimates:
//   running = momentum * running + (1 - momentum) * batch
// (the running variance uses the unbiased estimate). Eval mode is the fixed
// affine map built from the running statistics, which start at mean 0 and
// variance 1.
template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(std::size_t channels, double momentum = 0.9, double eps = 1e-5)
      : channels_(channels), momentum_(momentum), eps_(eps) {
    require(channels >= 1, ErrorKind::kInvalidArgument, "batch norm needs >= 1 channel");
    require(momentum > 0.0 && momentum < 1.0, ErrorKind::kInvalidArgument,
            "batch norm momentum must be in (0, 1)");
    require(eps > 0.0, ErrorKind::kInvalidArgument, "batch norm eps must be positive");
    gamma.assign(channels, T(1));
    beta.assign(channels, T(0));
    running_mean.assign(channels, T(0));
    running_var.assign(channels, T(1));
    grad_gamma.assign(channels, T(0));
    grad_beta.assign(channels, T(0));
  }

  std::size_t channels() const { return channels_; }
  double momentum() const { return momentum_; }
  double eps() const { return eps_; }

  Tensor4<T> forward(const Tensor4<T>& x, Mode mode) {
    const Shape4& s = x.shape();
    require(s.channels == channels_, ErrorKind::kShape,
            "batch norm expects " + std::to_string(channels_) + " channels, got " +
                std::to_string(s.channels));
    mode_ = mode;
    const std::size_t count = s.batch * s.plane();
    require(count >= 1, ErrorKind::kShape, "batch norm on empty input");
    normalized_ = Tensor4<T>(s);
    inv_std_.assign(channels_, 0.0);
    Tensor4<T> y(s);

    for (std::size_t c = 0; c < channels_; ++c) {
      double mean, inv_std;
      if (mode == Mode::kTrain) {
        // Per-plane sums in T, accumulated across planes in double.
        double sum = 0.0;
        for (std::size_t n = 0; n < s.batch; ++n) {
          const auto xp = x.plane(n, c);
          sum += lane_sum<T>(xp.size(), [&](std::size_t i) { return xp[i]; });
        }
        mean = sum / static_cast<double>(count);
        double sq = 0.0;
        for (std::size_t n = 0; n < s.batch; ++n) {
          const auto xp = x.plane(n, c);
          const T m = static_cast<T>(mean);
          sq += lane_sum<T>(xp.size(), [&](std::size_t i) { return (xp[i] - m) * (xp[i] - m); });
        }
        const double var = sq / static_cast<double>(count);
        inv_std = 1.0 / std::sqrt(var + eps_);
        const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
        running_mean[c] = static_cast<T>(momentum_ * running_mean[c] + (1.0 - momentum_) * mean);
        running_var[c] = static_cast<T>(momentum_ * running_var[c] + (1.0 - momentum_) * unbiased);
      } else {
        mean = running_mean[c];
        inv_std = 1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps_);
      }
      inv_std_[c] = inv_std;
      const T m = static_cast<T>(mean), is = static_cast<T>(inv_std);
      const T g = gamma[c], b = beta[c];
      for (std::size_t n = 0; n < s.batch; ++n) {
        auto xh = array(normalized_.plane(n, c));
        xh = (array(x.plane(n, c)) - m) * is;
        array(y.plane(n, c)) = xh * g + b;
      }
    }
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& grad_out) {
    const Shape4& s = normalized_.shape();
    require(grad_out.shape() == s, ErrorKind::kShape, "batch norm backward shape mismatch");
    const double count = static_cast<double>(s.batch * s.plane());
    Tensor4<T> grad_in(s);
    for (std::size_t c = 0; c < channels_; ++c) {
      double sum_dy = 0.0, sum_dy_xh = 0.0;
      for (std::size_t n = 0; n < s.batch; ++n) {
        const auto dy = grad_out.plane(n, c);
        const auto xh = normalized_.plane(n, c);
        sum_dy += lane_sum<T>(dy.size(), [&](std::size_t i) { return dy[i]; });
        sum_dy_xh += lane_sum<T>(dy.size(), [&](std::size_t i) { return dy[i] * xh[i]; });
      }
      grad_gamma[c] += static_cast<T>(sum_dy_xh);
      grad_beta[c] += static_cast<T>(sum_dy);
      const T scale = static_cast<T>(gamma[c] * inv_std_[c]);
      const T mean_dy = static_cast<T>(sum_dy / count);
      const T mean_dy_xh = static_cast<T>(sum_dy_xh / count);
      for (std::size_t n = 0; n < s.batch; ++n) {
        const auto dy = array(grad_out.plane(n, c));
        auto dx = array(grad_in.plane(n, c));
        if (mode_ == Mode::kTrain) {
          dx = (dy - mean_dy - array(normalized_.plane(n, c)) * mean_dy_xh) * scale;
        } else {
          dx = dy * scale;
        }
      }
    }
    return grad_in;
  }

  void zero_grad() {
    std::fill(grad_gamma.begin(), grad_gamma.end(), T(0));
    std::fill(grad_beta.begin(), grad_beta.end(), T(0));
  }

  void clear_cache() { normalized_ = Tensor4<T>(); }

  std::vector<T> gamma;
  std::vector<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  std::vector<T> grad_gamma;
  std::vector<T> grad_beta;

 private:
  std::size_t channels_ = 0;
  double momentum_ = 0.9;
  double eps_ = 1e-5;
  Mode mode_ = Mode::kTrain;
  using Array = Eigen::Array<T, Eigen::Dynamic, 1>;
  static Eigen::Map<Array> array(std::span<T> v) {
    return {v.data(), static_cast<Eigen::Index>(v.size())};
  }
  static Eigen::Map<const Array> array(std::span<const T> v) {
    return {v.data(), static_cast<Eigen::Index>(v.size())};
  }

  Tensor4<T> normalized_;
  std::vector<double> inv_std_;
};

}  // namespace wsed::nn
