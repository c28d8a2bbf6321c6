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

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "wsed/error.hpp"

// Little-endian binary containers.
//
// Tensor dump ("WSEDTNSR"):
//   magic[8] | version u32 | dtype u8 | rank u8 | dims u64 x rank | payload
//
// Checkpoint ("WSEDCKPT"):
//   magic[8] | version u32 | tensor count u32 |
//   per tensor: name_len u16 | name | dtype u8 | rank u8 | dims u64 x rank | payload |
//   crc32 u32 over every byte between the header and the crc.

namespace wsed::io {

inline constexpr std::string_view kTensorMagic = "WSEDTNSR";
inline constexpr std::string_view kCheckpointMagic = "WSEDCKPT";
inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { kFloat32 = 0, kUint8 = 1 };

inline std::size_t dtype_size(DType d) { return d == DType::kFloat32 ? 4 : 1; }

struct NamedTensor {
  std::string name;
  DType dtype = DType::kFloat32;
  std::vector<std::uint64_t> dims;
  // Exactly one of these is populated, according to dtype.
  std::vector<float> f32;
  std::vector<std::uint8_t> u8;

  std::uint64_t element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void raw(const std::vector<std::uint8_t>& b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }

  std::size_t size() const { return bytes_.size(); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size, std::string context)
      : data_(data), size_(size), context_(std::move(context)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return size_ - pos_; }

  void need(std::size_t n) const {
    if (n > size_ - pos_) fail(ErrorKind::kFormat, context_ + ": truncated file");
  }

 private:
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::string context_;
};

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

namespace detail {

inline void write_tensor_body(ByteWriter& w, const NamedTensor& t) {
  w.u8(static_cast<std::uint8_t>(t.dtype));
  w.u8(static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) w.u64(d);
  if (t.dtype == DType::kFloat32) {
    require(t.f32.size() == t.element_count(), ErrorKind::kShape, "tensor " + t.name + ": size mismatch");
    for (float v : t.f32) w.f32(v);
  } else {
    require(t.u8.size() == t.element_count(), ErrorKind::kShape, "tensor " + t.name + ": size mismatch");
    w.raw(t.u8);
  }
}

inline void read_tensor_body(ByteReader& r, NamedTensor& t, const std::string& context) {
  const auto dtype = r.u8();
  if (dtype > 1) fail(ErrorKind::kFormat, context + ": unknown dtype code " + std::to_string(dtype));
  t.dtype = static_cast<DType>(dtype);
  const auto rank = r.u8();
  t.dims.resize(rank);
  for (auto& d : t.dims) d = r.u64();
  const std::uint64_t count = t.element_count();
  if (count > r.remaining() / dtype_size(t.dtype)) fail(ErrorKind::kFormat, context + ": truncated file");
  if (t.dtype == DType::kFloat32) {
    t.f32.resize(count);
    for (auto& v : t.f32) v = r.f32();
  } else {
    t.u8.resize(count);
    for (auto& v : t.u8) v = r.u8();
  }
}

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

// ---- single tensor dump -------------------------------------------------

inline std::vector<std::uint8_t> encode_tensor(const std::vector<std::uint64_t>& dims,
                                               const std::vector<float>& values) {
  ByteWriter w;
  w.raw(kTensorMagic);
  w.u32(kTensorVersion);
  NamedTensor t{"", DType::kFloat32, dims, values, {}};
  detail::write_tensor_body(w, t);
  return std::move(w.bytes());
}

inline NamedTensor decode_tensor(const std::vector<std::uint8_t>& bytes, const std::string& context) {
  ByteReader r(bytes.data(), bytes.size(), context);
  if (r.str(kTensorMagic.size()) != kTensorMagic) {
    fail(ErrorKind::kFormat, context + ": not a tensor file (bad magic)");
  }
  const auto version = r.u32();
  if (version != kTensorVersion) {
    fail(ErrorKind::kFormat, context + ": unsupported tensor format version " + std::to_string(version));
  }
  NamedTensor t;
  detail::read_tensor_body(r, t, context);
  if (t.dtype != DType::kFloat32) fail(ErrorKind::kFormat, context + ": tensor dump must be float32");
  return t;
}

inline void write_tensor(const std::filesystem::path& path, const std::vector<std::uint64_t>& dims,
                         const std::vector<float>& values) {
  write_bytes(path, encode_tensor(dims, values));
}

inline NamedTensor read_tensor(const std::filesystem::path& path) {
  return decode_tensor(read_bytes(path), path.string());
}

// ---- checkpoint container ------------------------------------------------

inline std::vector<std::uint8_t> encode_container(const std::vector<NamedTensor>& tensors) {
  ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  const std::size_t payload_start = w.size();
  for (const auto& t : tensors) {
    require(t.name.size() <= 0xFFFF, ErrorKind::kInvalidArgument, "tensor name too long");
    w.u16(static_cast<std::uint16_t>(t.name.size()));
    w.raw(t.name);
    detail::write_tensor_body(w, t);
  }
  const auto& b = w.bytes();
  const std::uint32_t crc = detail::crc32_of(b.data() + payload_start, b.size() - payload_start);
  w.u32(crc);
  return std::move(w.bytes());
}

inline std::vector<NamedTensor> decode_container(const std::vector<std::uint8_t>& bytes,
                                                 const std::string& context) {
  ByteReader r(bytes.data(), bytes.size(), context);
  if (bytes.size() < kCheckpointMagic.size() ||
      r.str(kCheckpointMagic.size()) != kCheckpointMagic) {
    fail(ErrorKind::kFormat, context + ": not a checkpoint (bad magic; expected WSEDCKPT version " +
                                 std::to_string(kCheckpointVersion) + ")");
  }
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    fail(ErrorKind::kFormat, context + ": checkpoint format version " + std::to_string(version) +
                                 " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto count = r.u32();
  const std::size_t payload_start = r.position();
  if (bytes.size() < payload_start + 4) fail(ErrorKind::kFormat, context + ": truncated file");
  ByteReader body(bytes.data(), bytes.size() - 4, context);
  body.str(payload_start);
  std::vector<NamedTensor> tensors(count);
  for (auto& t : tensors) {
    t.name = body.str(body.u16());
    detail::read_tensor_body(body, t, context);
  }
  if (body.remaining() != 0) fail(ErrorKind::kFormat, context + ": trailing bytes before checksum");
  ByteReader tail(bytes.data() + bytes.size() - 4, 4, context);
  const std::uint32_t stored = tail.u32();
  const std::uint32_t actual = detail::crc32_of(bytes.data() + payload_start, bytes.size() - 4 - payload_start);
  if (stored != actual) fail(ErrorKind::kFormat, context + ": checksum mismatch");
  return tensors;
}

}  // namespace wsed::io
