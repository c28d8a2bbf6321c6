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

#include "wsed/error.hpp"
#include "wsed/nn/tensor.hpp"

namespace wsed::nn {

enum class Activation { kRelu, kSigmoid };

template <typename T>
T relu(T x) {
  return x > T(0) ? x : T(0);
}

// Evaluated so that neither branch overflows.
template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
class ActivationLayer {
 public:
  ActivationLayer() = default;
  explicit ActivationLayer(Activation kind) : kind_(kind) {}

  Activation kind() const { return kind_; }

  Tensor4<T> forward(const Tensor4<T>& x) {
    Tensor4<T> y(x.shape());
    if (kind_ == Activation::kRelu) {
      array(y) = array(x).max(T(0));
    } else {
      const T* in = x.data();
      T* out = y.data();
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid(in[i]);
    }
    output_ = y;
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& grad_out) {
    require(grad_out.shape() == output_.shape(), ErrorKind::kShape,
            "activation backward shape mismatch");
    Tensor4<T> grad_in(grad_out.shape());
    const auto y = array(output_);
    if (kind_ == Activation::kRelu) {
      array(grad_in) = (y > T(0)).select(array(grad_out), T(0));
    } else {
      array(grad_in) = array(grad_out) * y * (T(1) - y);
    }
    return grad_in;
  }

  void clear_cache() { output_ = Tensor4<T>(); }

 private:
  using Array = Eigen::Array<T, Eigen::Dynamic, 1>;
  static Eigen::Map<Array> array(Tensor4<T>& t) { return {t.data(), static_cast<Eigen::Index>(t.size())}; }
  static Eigen::Map<const Array> array(const Tensor4<T>& t) {
    return {t.data(), static_cast<Eigen::Index>(t.size())};
  }

  Activation kind_ = Activation::kRelu;
  Tensor4<T> output_;
};

}  // namespace wsed::nn
