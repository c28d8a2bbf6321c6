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

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wsed/error.hpp"

namespace wsed::nn {

// Sum of f(i) over [0, n) in eight interleaved lanes that are combined in a
// fixed order. Eigen's vectorized reductions peel according to the runtime
// address of the buffer, which makes results depend on heap layout; this
// does not.
template <typename T, typename F>
double lane_sum(std::size_t n, F f) {
  std::array<T, 8> acc{};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) acc[l] += f(i + l);
  }
  double total = 0.0;
  for (T a : acc) total += static_cast<double>(a);
  for (; i < n; ++i) total += static_cast<double>(f(i));
  return total;
}

struct Shape4 {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t time = 0;
  std::size_t freq = 0;

  std::size_t plane() const { return time * freq; }
  std::size_t size() const { return batch * channels * time * freq; }
  bool operator==(const Shape4&) const = default;

  std::string str() const {
    return "(" + std::to_string(batch) + ", " + std::to_string(channels) + ", " +
           std::to_string(time) + ", " + std::to_string(freq) + ")";
  }
};

// Dense (batch, channels, time, freq) tensor, row-major.
template <typename T>
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape, T fill = T(0)) : shape_(shape), data_(shape.size(), fill) {}
  Tensor4(std::size_t n, std::size_t c, std::size_t t, std::size_t f, T fill = T(0))
      : Tensor4(Shape4{n, c, t, f}, fill) {}

  const Shape4& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  std::size_t index(std::size_t n, std::size_t c, std::size_t t, std::size_t f) const {
    return ((n * shape_.channels + c) * shape_.time + t) * shape_.freq + f;
  }
  T& operator()(std::size_t n, std::size_t c, std::size_t t, std::size_t f) {
    return data_[index(n, c, t, f)];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t t, std::size_t f) const {
    return data_[index(n, c, t, f)];
  }

  // One (time x freq) plane.
  std::span<T> plane(std::size_t n, std::size_t c) {
    return {data_.data() + index(n, c, 0, 0), shape_.plane()};
  }
  std::span<const T> plane(std::size_t n, std::size_t c) const {
    return {data_.data() + index(n, c, 0, 0), shape_.plane()};
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  template <typename U>
  Tensor4<U> cast() const {
    Tensor4<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data()[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  Shape4 shape_;
  std::vector<T> data_;
};

// A named trainable tensor together with its gradient accumulator.
template <typename T>
struct ParamRef {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<T>* value = nullptr;
  std::vector<T>* grad = nullptr;
};

// A named non-trainable state tensor (batch-norm running statistics).
template <typename T>
struct BufferRef {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<T>* value = nullptr;
};

}  // namespace wsed::nn
