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
#include <cstdint>
#include <span>
#include <vector>

#include "wsed/error.hpp"
#include "wsed/nn/tensor.hpp"

namespace wsed::nn {

struct AdamOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamOptions options;
  std::uint64_t step_count = 0;
  // One moment vector per parameter tensor, allocated on the first step.
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

// Bias-corrected Adam over a fixed list of parameter tensors.
template <typename T>
void adam_step(std::span<const ParamRef<T>> params, AdamState<T>& state) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].value->size(), T(0));
      state.v[i].assign(params[i].value->size(), T(0));
    }
  }
  require(state.m.size() == params.size(), ErrorKind::kShape,
          "adam: parameter list does not match optimizer state");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i].value->size() == params[i].grad->size() &&
                state.m[i].size() == params[i].value->size(),
            ErrorKind::kShape, "adam: shape mismatch for " + params[i].name);
  }

  const AdamOptions& o = state.options;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& value = *params[i].value;
    const auto& grad = *params[i].grad;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double g = grad[j];
      const double mj = o.beta1 * m[j] + (1.0 - o.beta1) * g;
      const double vj = o.beta2 * v[j] + (1.0 - o.beta2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      value[j] = static_cast<T>(value[j] - o.lr * (mj / c1) / (std::sqrt(vj / c2) + o.eps));
    }
  }
}

// Single flat tensor convenience overload.
template <typename T>
void adam_step(std::vector<T>& value, std::vector<T>& grad, AdamState<T>& state) {
  const ParamRef<T> ref{"param", {value.size()}, &value, &grad};
  adam_step<T>(std::span<const ParamRef<T>>(&ref, 1), state);
}

}  // namespace wsed::nn
