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
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "wsed/error.hpp"

namespace wsed::audio {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 0;

  std::size_t size() const { return samples.size(); }
  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

inline void validate(const Waveform& wave) {
  require(wave.sample_rate > 0, ErrorKind::kInvalidArgument,
          "waveform sample rate must be positive");
  require_finite(wave.samples, "waveform");
}

enum class SampleFormat { kPcm16, kFloat32 };

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

// Encodes a mono waveform as a RIFF/WAVE byte stream. PCM16 clips to [-1, 1].
inline std::vector<std::uint8_t> encode_wav(const Waveform& wave, SampleFormat format) {
  validate(wave);
  const bool is_float = format == SampleFormat::kFloat32;
  const std::uint16_t bits = is_float ? 32 : 16;
  const std::uint16_t block_align = bits / 8;
  const auto data_bytes = static_cast<std::uint32_t>(wave.samples.size() * block_align);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  const auto tag = [&](const char* s) { out.insert(out.end(), s, s + 4); };
  tag("RIFF");
  detail::put_u32(out, 36 + data_bytes);
  tag("WAVE");
  tag("fmt ");
  detail::put_u32(out, 16);
  detail::put_u16(out, is_float ? 3 : 1);
  detail::put_u16(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(wave.sample_rate));
  detail::put_u32(out, static_cast<std::uint32_t>(wave.sample_rate) * block_align);
  detail::put_u16(out, block_align);
  detail::put_u16(out, bits);
  tag("data");
  detail::put_u32(out, data_bytes);
  for (double s : wave.samples) {
    if (is_float) {
      detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
    } else {
      const double clipped = std::clamp(s, -1.0, 1.0);
      const auto q = static_cast<std::int16_t>(
          std::clamp(std::lround(clipped * 32768.0), -32768L, 32767L));
      detail::put_u16(out, static_cast<std::uint16_t>(q));
    }
  }
  return out;
}

inline Waveform decode_wav(const std::vector<std::uint8_t>& bytes) {
  const auto bad = [](const std::string& why) { fail(ErrorKind::kFormat, "malformed WAV: " + why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    bad("missing RIFF/WAVE header");
  }

  std::uint16_t format_tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::uint32_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = detail::get_u32(chunk + 4);
    if (pos + 8 + size > bytes.size()) bad("chunk exceeds file size");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) bad("fmt chunk too short");
      format_tag = detail::get_u16(chunk + 8);
      channels = detail::get_u16(chunk + 10);
      rate = detail::get_u32(chunk + 12);
      bits = detail::get_u16(chunk + 22);
      // WAVE_FORMAT_EXTENSIBLE: the real format is the first two bytes of the subformat GUID.
      if (format_tag == 0xFFFE) {
        if (size < 40) bad("extensible fmt chunk too short");
        format_tag = detail::get_u16(chunk + 8 + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = size;
    }
    pos += 8 + size + (size & 1);
  }
  if (!have_fmt) bad("no fmt chunk");
  if (data == nullptr) bad("no data chunk");
  if (channels != 1) {
    fail(ErrorKind::kFormat, "unsupported channel count " + std::to_string(channels) +
                                 " (only mono audio is accepted)");
  }
  if (rate == 0) bad("zero sample rate");

  Waveform wave;
  wave.sample_rate = static_cast<int>(rate);
  if (format_tag == 1 && bits == 16) {
    wave.samples.resize(data_size / 2);
    for (std::size_t i = 0; i < wave.samples.size(); ++i) {
      const auto v = static_cast<std::int16_t>(detail::get_u16(data + 2 * i));
      wave.samples[i] = v / 32768.0;
    }
  } else if (format_tag == 3 && bits == 32) {
    wave.samples.resize(data_size / 4);
    for (std::size_t i = 0; i < wave.samples.size(); ++i) {
      wave.samples[i] = std::bit_cast<float>(detail::get_u32(data + 4 * i));
    }
  } else {
    fail(ErrorKind::kFormat, "unsupported WAV encoding (format " + std::to_string(format_tag) +
                                 ", " + std::to_string(bits) + " bits)");
  }
  require_finite(wave.samples, "WAV data");
  return wave;
}

inline Waveform read_wav(const std::filesystem::path& path) {
  try {
    return decode_wav(detail::read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kIo) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

inline void write_wav(const std::filesystem::path& path, const Waveform& wave,
                      SampleFormat format = SampleFormat::kFloat32) {
  const auto bytes = encode_wav(wave, format);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace wsed::audio
