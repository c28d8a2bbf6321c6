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
#include <numeric>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "wsed/error.hpp"
#include "wsed/manifest.hpp"

namespace wsed::metrics {

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const Counts&) const = default;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

namespace detail {
inline double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }
}  // namespace detail

// Any 0/0 is 0.
inline Prf precision_recall_f1(const Counts& c) {
  const auto tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  Prf out;
  out.precision = detail::ratio(tp, tp + fp);
  out.recall = detail::ratio(tp, tp + fn);
  out.f1 = detail::ratio(2.0 * tp, 2.0 * tp + fp + fn);
  return out;
}

// Area under the ROC curve as the Mann-Whitney statistic (ties count one
// half). Undefined without both classes present.
template <typename L>
std::optional<double> auc(std::span<const double> scores, std::span<const L> labels) {
  require(scores.size() == labels.size(), ErrorKind::kShape, "auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos = 0.0, neg = 0.0, rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1 .. j share their mean.
    const double mean_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t q = i; q < j; ++q) {
      if (labels[order[q]]) {
        pos += 1.0;
        rank_sum += mean_rank;
      } else {
        neg += 1.0;
      }
    }
    i = j;
  }
  if (pos == 0.0 || neg == 0.0) return std::nullopt;
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

// Mean over positives of the precision at each positive's rank, ranking by
// descending score with ties in input order. Undefined without positives.
template <typename L>
std::optional<double> average_precision(std::span<const double> scores, std::span<const L> labels) {
  require(scores.size() == labels.size(), ErrorKind::kShape, "ap: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double hits = 0.0, sum = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (labels[order[r]]) {
      hits += 1.0;
      sum += hits / static_cast<double>(r + 1);
    }
  }
  if (hits == 0.0) return std::nullopt;
  return sum / hits;
}

// Mean of the defined values; undefined if none are.
inline std::optional<double> mean_defined(std::span<const std::optional<double>> values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

// Binarizes scores with a strict threshold and counts against a binary
// reference.
template <typename L>
Counts threshold_counts(std::span<const double> scores, std::span<const L> reference, double threshold) {
  require(scores.size() == reference.size(), ErrorKind::kShape, "prediction and reference differ in length");
  Counts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool p = scores[i] > threshold;
    const bool r = static_cast<bool>(reference[i]);
    if (p && r) ++c.tp;
    else if (p) ++c.fp;
    else if (r) ++c.fn;
  }
  return c;
}

// Per-class counts for K x T score and reference matrices (row-major by class).
template <typename L>
std::vector<Counts> frame_counts(std::span<const double> scores, std::span<const L> reference, std::size_t n_classes,
                                 double threshold) {
  require(scores.size() == reference.size(), ErrorKind::kShape, "frame scores and reference differ in size");
  require(n_classes >= 1 && scores.size() % n_classes == 0, ErrorKind::kShape, "frame matrix is not K x T");
  const std::size_t T = scores.size() / n_classes;
  std::vector<Counts> out(n_classes);
  for (std::size_t k = 0; k < n_classes; ++k) {
    out[k] = threshold_counts(scores.subspan(k * T, T), reference.subspan(k * T, T), threshold);
  }
  return out;
}

struct CollarSpec {
  double onset = 0.2;
  double offset_abs = 0.2;
  double offset_rel = 0.5;
};

// Whether an estimate is within the onset and offset collars of a reference.
inline bool within_collar(const EventAnnotation& ref, const EventAnnotation& est, const CollarSpec& c) {
  if (ref.label != est.label) return false;
  const double offset_collar = std::max(c.offset_abs, c.offset_rel * (ref.offset - ref.onset));
  return std::abs(est.onset - ref.onset) <= c.onset && std::abs(est.offset - ref.offset) <= offset_collar;
}

// One-to-one greedy matching of the eligible (ref, est) pairs in order of
// ascending onset difference, ties by ref then est index. Returns the pairs.
inline std::vector<std::pair<std::size_t, std::size_t>> greedy_match(const std::vector<EventAnnotation>& refs,
                                                                     const std::vector<EventAnnotation>& ests,
                                                                     const CollarSpec& collars) {
  std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
  for (std::size_t r = 0; r < refs.size(); ++r) {
    for (std::size_t e = 0; e < ests.size(); ++e) {
      if (within_collar(refs[r], ests[e], collars)) {
        candidates.emplace_back(std::abs(ests[e].onset - refs[r].onset), r, e);
      }
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<bool> ref_used(refs.size(), false), est_used(ests.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& [d, r, e] : candidates) {
    if (ref_used[r] || est_used[e]) continue;
    ref_used[r] = est_used[e] = true;
    pairs.emplace_back(r, e);
  }
  return pairs;
}

// Per-class counts for one clip.
inline std::vector<Counts> match_events(const std::vector<EventAnnotation>& refs,
                                        const std::vector<EventAnnotation>& ests, std::size_t n_classes,
                                        const CollarSpec& collars = {}) {
  std::vector<Counts> out(n_classes);
  for (const auto& r : refs) {
    require(r.label < n_classes, ErrorKind::kShape, "reference label out of range");
    ++out[r.label].fn;
  }
  for (const auto& e : ests) {
    require(e.label < n_classes, ErrorKind::kShape, "estimated label out of range");
    ++out[e.label].fp;
  }
  for (const auto& [r, e] : greedy_match(refs, ests, collars)) {
    auto& c = out[refs[r].label];
    ++c.tp;
    --c.fn;
    --c.fp;
  }
  return out;
}

struct ErComponents {
  std::size_t s = 0;
  std::size_t d = 0;
  std::size_t i = 0;
  std::size_t n_ref = 0;

  // Adds one clip's counts: S = min(FN, FP), D = max(0, FN - FP), I = max(0, FP - FN).
  void add(const Counts& clip) {
    s += std::min(clip.fn, clip.fp);
    d += clip.fn > clip.fp ? clip.fn - clip.fp : 0;
    i += clip.fp > clip.fn ? clip.fp - clip.fn : 0;
    n_ref += clip.tp + clip.fn;
  }

  std::optional<double> rate(std::size_t count) const {
    if (n_ref == 0) return std::nullopt;
    return static_cast<double>(count) / static_cast<double>(n_ref);
  }
  std::optional<double> er() const { return rate(s + d + i); }
};

inline ErComponents error_rate(std::span<const Counts> per_clip) {
  ErComponents out;
  for (const auto& c : per_clip) out.add(c);
  return out;
}

}  // namespace wsed::metrics
