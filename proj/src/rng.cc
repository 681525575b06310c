#include "primematch/rng.h"

#include <sodium.h>

#include <cstring>
#include <stdexcept>

#include "primematch/sodium_init.h"

namespace primematch {

ChaChaStream::ChaChaStream(const Seed& seed) : key_(seed) { ensure_sodium(); }

ChaChaStream ChaChaStream::from_os() { return ChaChaStream(random_seed()); }

void ChaChaStream::refill() {
  // 96-bit nonce is zero; the 32-bit block counter starts where the last
  // refill stopped.
  std::array<uint8_t, crypto_stream_chacha20_ietf_NONCEBYTES> nonce{};
  if (block_ + buffer_.size() / 64 > 0xffffffffull) throw std::length_error("ChaCha20 stream exhausted");
  buffer_.fill(0);
  crypto_stream_chacha20_ietf_xor_ic(buffer_.data(), buffer_.data(), buffer_.size(), nonce.data(),
                                     static_cast<uint32_t>(block_), key_.data());
  block_ += buffer_.size() / 64;
  pos_ = 0;
}

void ChaChaStream::fill(std::span<uint8_t> out) {
  size_t done = 0;
  while (done < out.size()) {
    if (pos_ == buffer_.size()) refill();
    size_t take = std::min(out.size() - done, buffer_.size() - pos_);
    std::memcpy(out.data() + done, buffer_.data() + pos_, take);
    pos_ += take;
    done += take;
  }
}

uint32_t ChaChaStream::next_u32() {
  std::array<uint8_t, 4> b{};
  fill(b);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) | (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

uint32_t ChaChaStream::uniform_below(uint32_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform_below(0)");
  // Largest multiple of bound that fits in 2^32; draws at or above it are
  // rejected.
  const uint64_t limit = (uint64_t{1} << 32) - ((uint64_t{1} << 32) % bound);
  while (true) {
    uint32_t x = next_u32();
    if (x < limit) return x % bound;
  }
}

Seed ChaChaStream::next_seed() {
  Seed s{};
  fill(s);
  return s;
}

Seed random_seed() {
  ensure_sodium();
  Seed s{};
  randombytes_buf(s.data(), s.size());
  return s;
}

Seed derive_seed(const Seed& seed, std::string_view label, std::span<const uint8_t> context) {
  ensure_sodium();
  crypto_generichash_state st;
  crypto_generichash_init(&st, seed.data(), seed.size(), 32);
  uint8_t len[4] = {static_cast<uint8_t>(label.size() >> 24), static_cast<uint8_t>(label.size() >> 16),
                    static_cast<uint8_t>(label.size() >> 8), static_cast<uint8_t>(label.size())};
  crypto_generichash_update(&st, len, 4);
  crypto_generichash_update(&st, reinterpret_cast<const uint8_t*>(label.data()), label.size());
  crypto_generichash_update(&st, context.data(), context.size());
  Seed out{};
  crypto_generichash_final(&st, out.data(), out.size());
  return out;
}

}  // namespace primematch
