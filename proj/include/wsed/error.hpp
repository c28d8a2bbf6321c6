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
#include <stdexcept>
#include <string>

namespace wsed {

enum class ErrorKind {
  kInvalidArgument,
  kIo,
  kFormat,
  kShape,
  kNumeric,
};

// All library failures are reported as wsed::Error; the kind lets the CLI
// map failures onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

template <typename Range>
void require_finite(const Range& values, const std::string& where) {
  for (const auto& v : values) {
    if (!std::isfinite(static_cast<double>(v))) {
      fail(ErrorKind::kNumeric, "non-finite value in " + where);
    }
  }
}

}  // namespace wsed
