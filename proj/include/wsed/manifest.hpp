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
#include <cctype>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>
#include <string>
#include <vector>

#include "wsed/error.hpp"

// JSON-lines clip manifest, one clip per line:
//   {"clip_id": str, "mixture": path, "fold": int, "snr_db": float,
//    "events": [{"label": str, "onset": s, "offset": s, "source": path}]}
// Paths are relative to the manifest's directory unless absolute.

namespace wsed {

struct EventAnnotation {
  // Index into the class list.
  std::size_t label = 0;
  double onset = 0.0;
  double offset = 0.0;
};

struct ManifestEvent {
  std::string label;
  double onset = 0.0;
  double offset = 0.0;
  // Isolated event waveform covering [onset, offset); may be empty.
  std::string source;
};

struct ManifestEntry {
  std::string clip_id;
  std::string mixture;
  int fold = 0;
  double snr_db = 0.0;
  std::vector<ManifestEvent> events;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& rel) const {
    const std::filesystem::path p(rel);
    return p.is_absolute() ? p : base_dir / p;
  }

  // Sorted union of every event label in the manifest.
  std::vector<std::string> labels() const {
    std::set<std::string> s;
    for (const auto& e : entries) {
      for (const auto& ev : e.events) s.insert(ev.label);
    }
    return {s.begin(), s.end()};
  }
};

inline void to_json(nlohmann::json& j, const ManifestEvent& e) {
  j = nlohmann::json{{"label", e.label}, {"onset", e.onset}, {"offset", e.offset}, {"source", e.source}};
}

inline void from_json(const nlohmann::json& j, ManifestEvent& e) {
  j.at("label").get_to(e.label);
  j.at("onset").get_to(e.onset);
  j.at("offset").get_to(e.offset);
  if (j.contains("source")) j.at("source").get_to(e.source);
}

inline void to_json(nlohmann::json& j, const ManifestEntry& e) {
  j = nlohmann::json{{"clip_id", e.clip_id}, {"mixture", e.mixture}, {"fold", e.fold},
                     {"snr_db", e.snr_db},   {"events", e.events}};
}

inline void from_json(const nlohmann::json& j, ManifestEntry& e) {
  j.at("clip_id").get_to(e.clip_id);
  j.at("mixture").get_to(e.mixture);
  j.at("fold").get_to(e.fold);
  if (j.contains("snr_db")) j.at("snr_db").get_to(e.snr_db);
  if (j.contains("events")) j.at("events").get_to(e.events);
}

inline Manifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                               const std::string& context) {
  Manifest m;
  m.base_dir = base_dir;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    try {
      ManifestEntry entry = nlohmann::json::parse(line).get<ManifestEntry>();
      for (const auto& ev : entry.events) {
        if (!(ev.onset >= 0.0 && ev.onset < ev.offset)) {
          fail(ErrorKind::kFormat, "event must satisfy 0 <= onset < offset");
        }
      }
      m.entries.push_back(std::move(entry));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kFormat, context + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      fail(e.kind(), context + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return m;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path(), path.string());
}

inline std::string manifest_line(const ManifestEntry& entry) { return nlohmann::json(entry).dump(); }

inline void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write manifest " + path.string());
  for (const auto& e : entries) out << manifest_line(e) << '\n';
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace wsed
