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

#include "wsed/error.hpp"

namespace wsed::nn {

struct BceOptions {
  double clamp = 1e-7;
  // Keep only the -y log p term (the literal positive-class form), for ablation.
  bool positive_term_only = false;
};

struct LossResult {
  double loss = 0.0;
  // d loss / d prediction, one per class.
  std::vector<double> grad;
};

// Binary cross-entropy summed over classes:
//   -sum_k [ y_k ln p_k + (1 - y_k) ln(1 - p_k) ]
// with p clamped to [clamp, 1 - clamp]. The gradient is taken at the clamped
// value, (p - y) / (p (1 - p)).
template <typename P, typename Y>
LossResult bce_loss(std::span<const P> predictions, std::span<const Y> targets,
                    const BceOptions& options = {}) {
  require(predictions.size() == targets.size(), ErrorKind::kShape,
          "bce: predictions and targets differ in length");
  LossResult out;
  out.grad.resize(predictions.size());
  const double lo = options.clamp, hi = 1.0 - options.clamp;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const double p = std::clamp(static_cast<double>(predictions[k]), lo, hi);
    const double y = static_cast<double>(targets[k]);
    if (options.positive_term_only) {
      out.loss -= y * std::log(p);
      out.grad[k] = -y / p;
    } else {
      out.loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
      out.grad[k] = (p - y) / (p * (1.0 - p));
    }
  }
  return out;
}

}  // namespace wsed::nn
