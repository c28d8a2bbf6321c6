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
#include <functional>
#include <span>
#include <vector>

#include "wsed/error.hpp"

namespace wsed::nn {

// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
inline std::vector<double> numeric_gradient(
    const std::function<double(std::span<const double>)>& f, std::vector<double> x, double eps) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double up = f(x);
    x[i] = saved - eps;
    const double down = f(x);
    x[i] = saved;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

// max_i |a_i - n_i| / max(|a_i|, |n_i|, floor), where floor is 1e-3 of the
// largest gradient magnitude so near-zero entries are judged on the scale of
// the whole gradient rather than on their own noise.
inline double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  require(analytic.size() == numeric.size(), ErrorKind::kShape,
          "gradient check: analytic and numeric gradients differ in length");
  double scale = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  if (scale == 0.0) return 0.0;
  const double floor = 1e-3 * scale;
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

// Compares an analytic gradient of a scalar function against central
// differences at x. Returns the maximum relative error; the caller decides
// the tolerance.
inline double grad_check(const std::function<double(std::span<const double>)>& f,
                         const std::function<std::vector<double>(std::span<const double>)>& analytic,
                         const std::vector<double>& x, double eps = 1e-5) {
  const auto a = analytic(x);
  const auto n = numeric_gradient(f, x, eps);
  return max_relative_error(a, n);
}

}  // namespace wsed::nn
