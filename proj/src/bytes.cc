#include "primematch/bytes.h"

#include <sodium.h>

namespace primematch {

void ByteWriter::put_u16(uint16_t v) {
  buf_.push_back(static_cast<uint8_t>(v >> 8));
  buf_.push_back(static_cast<uint8_t>(v));
}

void ByteWriter::put_u32(uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) buf_.push_back(static_cast<uint8_t>(v >> shift));
}

void ByteWriter::put_u64(uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) buf_.push_back(static_cast<uint8_t>(v >> shift));
}

void ByteWriter::put_raw(std::span<const uint8_t> data) { buf_.insert(buf_.end(), data.begin(), data.end()); }

void ByteWriter::put_blob(std::span<const uint8_t> data) {
  put_u32(static_cast<uint32_t>(data.size()));
  put_raw(data);
}

void ByteWriter::put_string(std::string_view s) {
  put_blob({reinterpret_cast<const uint8_t*>(s.data()), s.size()});
}

void ByteReader::need(size_t n) const {
  if (remaining() < n) {
    throw DecodeError("truncated input: need " + std::to_string(n) + " bytes, have " + std::to_string(remaining()));
  }
}

uint8_t ByteReader::get_u8() {
  need(1);
  return data_[pos_++];
}

uint16_t ByteReader::get_u16() {
  need(2);
  uint16_t v = static_cast<uint16_t>((data_[pos_] << 8) | data_[pos_ + 1]);
  pos_ += 2;
  return v;
}

uint32_t ByteReader::get_u32() {
  need(4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_ + i];
  pos_ += 4;
  return v;
}

uint64_t ByteReader::get_u64() {
  need(8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_ + i];
  pos_ += 8;
  return v;
}

std::span<const uint8_t> ByteReader::get_raw(size_t n) {
  need(n);
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

Bytes ByteReader::get_blob(size_t max_len) {
  uint32_t len = get_u32();
  if (len > max_len) throw DecodeError("blob length " + std::to_string(len) + " exceeds limit");
  auto raw = get_raw(len);
  return Bytes(raw.begin(), raw.end());
}

std::string ByteReader::get_string(size_t max_len) {
  Bytes b = get_blob(max_len);
  return std::string(b.begin(), b.end());
}

size_t ByteReader::get_count(size_t max_count) {
  uint32_t n = get_u32();
  if (n > max_count) throw DecodeError("element count " + std::to_string(n) + " exceeds limit");
  return n;
}

void ByteReader::expect_done() const {
  if (!done()) throw DecodeError(std::to_string(remaining()) + " trailing bytes");
}

std::string to_hex(std::span<const uint8_t> data) {
  std::string out(data.size() * 2 + 1, '\0');
  sodium_bin2hex(out.data(), out.size(), data.data(), data.size());
  out.pop_back();
  return out;
}

Bytes from_hex(std::string_view hex) {
  Bytes out(hex.size() / 2 + 1);
  size_t len = 0;
  if (sodium_hex2bin(out.data(), out.size(), hex.data(), hex.size(), nullptr, &len, nullptr) != 0 ||
      len * 2 != hex.size()) {
    throw DecodeError("invalid hex string");
  }
  out.resize(len);
  return out;
}

}  // namespace primematch
