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

#include <cstdio>
#include <json.hpp>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "wsed/error.hpp"
#include "wsed/manifest.hpp"
#include "wsed/segmentation_net.hpp"

namespace wsed::sed {

// v[k][t]: frequency mean of mask k at frame t.
struct FrameScores {
  std::vector<double> values;
  std::size_t n_classes = 0;
  std::size_t num_frames = 0;
  double frame_hop_seconds = 0.0;

  double at(std::size_t k, std::size_t t) const { return values[k * num_frames + t]; }
  std::span<const double> row(std::size_t k) const { return {values.data() + k * num_frames, num_frames}; }
};

inline FrameScores frame_scores(const MaskStack& masks, double frame_hop_seconds = 0.0) {
  FrameScores out;
  out.n_classes = masks.n_classes;
  out.num_frames = masks.num_frames;
  out.frame_hop_seconds = frame_hop_seconds;
  out.values.assign(masks.n_classes * masks.num_frames, 0.0);
  if (masks.n_bins == 0) return out;
  const double inv = 1.0 / static_cast<double>(masks.n_bins);
  for (std::size_t k = 0; k < masks.n_classes; ++k) {
    for (std::size_t t = 0; t < masks.num_frames; ++t) {
      double sum = 0.0;
      for (std::size_t f = 0; f < masks.n_bins; ++f) sum += masks.at(k, t, f);
      out.values[k * masks.num_frames + t] = sum * inv;
    }
  }
  return out;
}

// Classes whose clip probability is strictly above the threshold.
inline std::vector<std::size_t> tagging_gate(std::span<const double> tags, double threshold) {
  require(threshold > 0.0 && threshold < 1.0, ErrorKind::kInvalidArgument, "tag threshold must be in (0, 1)");
  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < tags.size(); ++k) {
    if (tags[k] > threshold) active.push_back(k);
  }
  return active;
}

// Half-open frame range [begin, end).
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - begin; }
  bool operator==(const Segment&) const = default;
};

// Maximal runs of frames >= lo that contain at least one frame >= hi.
inline std::vector<Segment> double_threshold(std::span<const double> scores, double hi, double lo) {
  require(0.0 <= lo && lo <= hi && hi <= 1.0, ErrorKind::kInvalidArgument,
          "thresholds must satisfy 0 <= lo <= hi <= 1");
  std::vector<Segment> out;
  std::size_t t = 0;
  while (t < scores.size()) {
    if (!(scores[t] >= lo)) {
      ++t;
      continue;
    }
    const std::size_t begin = t;
    bool seeded = false;
    while (t < scores.size() && scores[t] >= lo) {
      seeded = seeded || scores[t] >= hi;
      ++t;
    }
    if (seeded) out.push_back({begin, t});
  }
  return out;
}

enum class RuleOrder { kJoinThenFilter, kFilterThenJoin };

inline std::string to_string(RuleOrder o) {
  return o == RuleOrder::kJoinThenFilter ? "join_then_filter" : "filter_then_join";
}

inline RuleOrder parse_rule_order(const std::string& s) {
  if (s == "join_then_filter") return RuleOrder::kJoinThenFilter;
  if (s == "filter_then_join") return RuleOrder::kFilterThenJoin;
  fail(ErrorKind::kInvalidArgument, "unknown rule order '" + s + "'");
}

namespace detail {

inline std::vector<Segment> join_gaps(const std::vector<Segment>& segments, std::size_t min_gap) {
  std::vector<Segment> out;
  for (const auto& s : segments) {
    if (!out.empty() && s.begin - out.back().end < min_gap) {
      out.back().end = std::max(out.back().end, s.end);
    } else {
      out.push_back(s);
    }
  }
  return out;
}

inline std::vector<Segment> drop_short(const std::vector<Segment>& segments, std::size_t min_frames) {
  std::vector<Segment> out;
  for (const auto& s : segments) {
    if (s.length() >= min_frames) out.push_back(s);
  }
  return out;
}

}  // namespace detail

// Joins segments separated by fewer than min_gap_frames and removes those
// shorter than min_frames. Input must be sorted and disjoint.
inline std::vector<Segment> duration_filter_join(const std::vector<Segment>& segments, std::size_t min_frames,
                                                 std::size_t min_gap_frames,
                                                 RuleOrder order = RuleOrder::kJoinThenFilter) {
  for (std::size_t i = 0; i < segments.size(); ++i) {
    require(segments[i].begin < segments[i].end, ErrorKind::kInvalidArgument, "empty segment");
    if (i > 0) {
      require(segments[i - 1].end <= segments[i].begin, ErrorKind::kInvalidArgument,
              "segments must be sorted and disjoint");
    }
  }
  if (order == RuleOrder::kJoinThenFilter) {
    return detail::drop_short(detail::join_gaps(segments, min_gap_frames), min_frames);
  }
  return detail::join_gaps(detail::drop_short(segments, min_frames), min_gap_frames);
}

struct DetectionConfig {
  double hi = 0.2;
  double lo = 0.1;
  std::size_t min_frames = 10;
  std::size_t min_gap_frames = 10;
  double tag_threshold = 0.5;
  RuleOrder order = RuleOrder::kJoinThenFilter;
};

inline void validate(const DetectionConfig& c) {
  require(0.0 <= c.lo && c.lo <= c.hi && c.hi <= 1.0, ErrorKind::kInvalidArgument,
          "thresholds must satisfy 0 <= lo <= hi <= 1");
  require(c.tag_threshold > 0.0 && c.tag_threshold < 1.0, ErrorKind::kInvalidArgument,
          "tag threshold must be in (0, 1)");
}

inline void to_json(nlohmann::json& j, const DetectionConfig& c) {
  j = nlohmann::json{{"hi", c.hi},
                     {"lo", c.lo},
                     {"min_dur_frames", c.min_frames},
                     {"min_gap_frames", c.min_gap_frames},
                     {"tag_threshold", c.tag_threshold},
                     {"order", to_string(c.order)}};
}

struct DetectedEvent {
  std::size_t label = 0;
  double onset = 0.0;
  double offset = 0.0;
  // Clip-level tag probability of the class.
  double confidence = 0.0;

  EventAnnotation annotation() const { return {label, onset, offset}; }
};

// Frame index to seconds: onset = begin * hop / sr, offset = end * hop / sr.
inline double frame_to_seconds(std::size_t frame, std::size_t hop, int sample_rate) {
  return static_cast<double>(frame) * static_cast<double>(hop) / static_cast<double>(sample_rate);
}

// Gate, frame scores, double threshold and duration rules for one clip.
inline std::vector<DetectedEvent> detect_from_masks(const MaskStack& masks, std::span<const double> tags,
                                                    std::size_t hop, int sample_rate, const DetectionConfig& config) {
  validate(config);
  require(tags.size() == masks.n_classes, ErrorKind::kShape, "tag count does not match mask count");
  require(hop >= 1 && sample_rate > 0, ErrorKind::kInvalidArgument, "hop and sample rate must be positive");
  const auto scores = frame_scores(masks);
  std::vector<DetectedEvent> events;
  for (const auto k : tagging_gate(tags, config.tag_threshold)) {
    const auto segments = duration_filter_join(double_threshold(scores.row(k), config.hi, config.lo),
                                               config.min_frames, config.min_gap_frames, config.order);
    for (const auto& s : segments) {
      events.push_back({k, frame_to_seconds(s.begin, hop, sample_rate), frame_to_seconds(s.end, hop, sample_rate),
                        tags[k]});
    }
  }
  return events;
}

inline void write_events_csv_header(std::ostream& out) { out << "clip_id,label,onset,offset,confidence\n"; }

inline void write_events_csv(std::ostream& out, const std::string& clip_id, const std::vector<DetectedEvent>& events,
                             const std::vector<std::string>& labels) {
  char buf[96];
  for (const auto& e : events) {
    require(e.label < labels.size(), ErrorKind::kShape, "event label out of range");
    std::snprintf(buf, sizeof buf, ",%.3f,%.3f,%.3f\n", e.onset, e.offset, e.confidence);
    out << clip_id << ',' << labels[e.label] << buf;
  }
}

}  // namespace wsed::sed
