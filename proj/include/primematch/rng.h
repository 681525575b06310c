#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace primematch {

using Seed = std::array<uint8_t, 32>;

// Deterministic byte stream: ChaCha20 (IETF) keystream under a 32-byte key
// with an all-zero nonce, consumed front to back. Two streams built from the
// same seed emit identical bytes; this is what lets both clients derive the
// same comparison randomness.
class ChaChaStream {
 public:
  explicit ChaChaStream(const Seed& seed);

  // Fresh seed from the operating system CSPRNG.
  static ChaChaStream from_os();

  void fill(std::span<uint8_t> out);
  uint32_t next_u32();  // little-endian
  // Uniform in [0, bound) by rejection; bound must be nonzero.
  uint32_t uniform_below(uint32_t bound);
  Seed next_seed();

 private:
  void refill();

  Seed key_;
  uint64_t block_ = 0;
  std::array<uint8_t, 64 * 16> buffer_{};
  size_t pos_ = sizeof(buffer_);
};

Seed random_seed();

// Keyed BLAKE2b-256 expansion: seed' = H_key=seed(label || context).
Seed derive_seed(const Seed& seed, std::string_view label, std::span<const uint8_t> context = {});

}  // namespace primematch
