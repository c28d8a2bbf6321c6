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
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wsed/error.hpp"

// Global pooling of one T-F segmentation mask to a clip-level presence
// probability. Masks are passed flattened in row-major (time, freq) order;
// that order is also the tie-break for argmax and rank assignment, which keeps
// gradients deterministic.

namespace wsed::pooling {

enum class Kind { kGmp, kGap, kGwrp };

struct PoolingSpec {
  Kind kind = Kind::kGwrp;
  // Decay of the rank weights (gwrp only).
  double r = 0.9998;
};

inline void validate(const PoolingSpec& spec) {
  if (spec.kind == Kind::kGwrp) {
    require(spec.r >= 0.0 && spec.r <= 1.0, ErrorKind::kInvalidArgument,
            "gwrp r must lie in [0, 1], got " + std::to_string(spec.r));
  }
}

inline std::string to_string(Kind kind) {
  switch (kind) {
    case Kind::kGmp: return "gmp";
    case Kind::kGap: return "gap";
    case Kind::kGwrp: return "gwrp";
  }
  return "?";
}

inline Kind parse_kind(const std::string& name) {
  if (name == "gmp") return Kind::kGmp;
  if (name == "gap") return Kind::kGap;
  if (name == "gwrp") return Kind::kGwrp;
  fail(ErrorKind::kInvalidArgument, "unknown pooling '" + name + "' (expected gmp, gap or gwrp)");
}

namespace detail {

template <typename T>
void require_nonempty(std::span<const T> mask) {
  require(!mask.empty(), ErrorKind::kShape, "pooling over an empty mask");
}

// Indices of the mask sorted by descending value; equal values keep row-major order.
template <typename T>
std::vector<std::size_t> descending_order(std::span<const T> mask) {
  // Sorting (value, index) pairs directly is much faster than an indirect
  // stable sort; the index tie-break gives the same order.
  std::vector<std::pair<T, std::size_t>> keyed(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) keyed[i] = {mask[i], i};
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  std::vector<std::size_t> order(mask.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = keyed[j].second;
  return order;
}

// w_j = r^j / Z(r) for ranks j = 0..M-1, with 0^0 = 1.
inline std::vector<double> rank_weights(std::size_t m, double r) {
  std::vector<double> w(m);
  double power = 1.0, z = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    w[j] = power;
    z += power;
    power *= r;
  }
  for (double& x : w) x /= z;
  return w;
}

}  // namespace detail

template <typename T>
std::size_t argmax(std::span<const T> mask) {
  detail::require_nonempty(mask);
  std::size_t best = 0;
  for (std::size_t i = 1; i < mask.size(); ++i) {
    if (mask[i] > mask[best]) best = i;
  }
  return best;
}

template <typename T>
double gmp(std::span<const T> mask) {
  return static_cast<double>(mask[argmax(mask)]);
}

template <typename T>
void gmp_backward(std::span<const T> mask, double grad_out, std::span<T> grad) {
  std::fill(grad.begin(), grad.end(), T(0));
  grad[argmax(mask)] = static_cast<T>(grad_out);
}

template <typename T>
double gap(std::span<const T> mask) {
  detail::require_nonempty(mask);
  double sum = 0.0;
  for (T v : mask) sum += v;
  return sum / static_cast<double>(mask.size());
}

template <typename T>
void gap_backward(std::span<const T> mask, double grad_out, std::span<T> grad) {
  detail::require_nonempty(mask);
  std::fill(grad.begin(), grad.end(), static_cast<T>(grad_out / static_cast<double>(mask.size())));
}

// sum_j r^(j-1) a_j / Z(r) over the mask values a sorted in descending order.
template <typename T>
double gwrp(std::span<const T> mask, double r) {
  detail::require_nonempty(mask);
  validate(PoolingSpec{Kind::kGwrp, r});
  const auto order = detail::descending_order(mask);
  const auto w = detail::rank_weights(mask.size(), r);
  double acc = 0.0;
  for (std::size_t j = 0; j < order.size(); ++j) acc += w[j] * mask[order[j]];
  return acc;
}

template <typename T>
void gwrp_backward(std::span<const T> mask, double r, double grad_out, std::span<T> grad) {
  detail::require_nonempty(mask);
  validate(PoolingSpec{Kind::kGwrp, r});
  const auto order = detail::descending_order(mask);
  const auto w = detail::rank_weights(mask.size(), r);
  for (std::size_t j = 0; j < order.size(); ++j) grad[order[j]] = static_cast<T>(grad_out * w[j]);
}

template <typename T>
double pool(std::span<const T> mask, const PoolingSpec& spec) {
  switch (spec.kind) {
    case Kind::kGmp: return gmp(mask);
    case Kind::kGap: return gap(mask);
    case Kind::kGwrp: return gwrp(mask, spec.r);
  }
  return 0.0;
}

// Writes grad_out * d pool / d mask into grad (same length as mask).
template <typename T>
void pool_backward(std::span<const T> mask, const PoolingSpec& spec, double grad_out,
                   std::span<T> grad) {
  require(grad.size() == mask.size(), ErrorKind::kShape, "pooling gradient buffer size mismatch");
  switch (spec.kind) {
    case Kind::kGmp: gmp_backward(mask, grad_out, grad); break;
    case Kind::kGap: gap_backward(mask, grad_out, grad); break;
    case Kind::kGwrp: gwrp_backward(mask, spec.r, grad_out, grad); break;
  }
}

}  // namespace wsed::pooling
