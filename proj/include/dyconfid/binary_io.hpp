// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

namespace dyconfid {

/// Raised for malformed, truncated or corrupted container files.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = ::crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

/// Little-endian byte sink.
class ByteWriter {
public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }

  /// Appends the CRC-32 of everything written so far.
  void seal() { u32(crc32_of(buf_.data(), buf_.size())); }

  const std::vector<std::uint8_t>& data() const { return buf_; }

private:
  std::vector<std::uint8_t> buf_;
};

/// Little-endian byte source with bounds checks.
class ByteReader {
public:
  explicit ByteReader(std::vector<std::uint8_t> buf) : buf_(std::move(buf)) {}

  /// Verifies and strips the trailing CRC-32.
  void verify_seal(const char* what) {
    if (buf_.size() < 4) throw FormatError(std::string(what) + ": file too short");
    const std::size_t body = buf_.size() - 4;
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(buf_[body + static_cast<std::size_t>(i)]) << (8 * i);
    if (crc32_of(buf_.data(), body) != stored) throw FormatError(std::string(what) + ": checksum mismatch");
    buf_.resize(body);
  }

  std::uint8_t u8() {
    need(1);
    return buf_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  void bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }

  std::size_t remaining() const { return buf_.size() - pos_; }
  bool empty() const { return buf_.empty(); }

private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw FormatError("unexpected end of data");
  }

  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

inline void write_bytes(const std::vector<std::uint8_t>& bytes, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace dyconfid
