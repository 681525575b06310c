#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "primematch/errors.h"

namespace primematch {

using Bytes = std::vector<uint8_t>;

// Integers are written big-endian; fixed-size blobs (scalars, points) are
// written as-is.
class ByteWriter {
 public:
  void put_u8(uint8_t v) { buf_.push_back(v); }
  void put_u16(uint16_t v);
  void put_u32(uint32_t v);
  void put_u64(uint64_t v);
  void put_raw(std::span<const uint8_t> data);
  // u32 length prefix followed by the bytes.
  void put_blob(std::span<const uint8_t> data);
  void put_string(std::string_view s);

  const Bytes& bytes() const& { return buf_; }
  Bytes bytes() && { return std::move(buf_); }
  size_t size() const { return buf_.size(); }

 private:
  Bytes buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

  uint8_t get_u8();
  uint16_t get_u16();
  uint32_t get_u32();
  uint64_t get_u64();
  std::span<const uint8_t> get_raw(size_t n);
  Bytes get_blob(size_t max_len = kDefaultBlobLimit);
  std::string get_string(size_t max_len = 4096);

  // Element count prefix (u32) with an upper bound so a hostile length
  // cannot trigger a huge allocation.
  size_t get_count(size_t max_count);

  size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }
  // Throws unless every byte was consumed.
  void expect_done() const;

  static constexpr size_t kDefaultBlobLimit = 1u << 24;

 private:
  void need(size_t n) const;

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

std::string to_hex(std::span<const uint8_t> data);
Bytes from_hex(std::string_view hex);

}  // namespace primematch
