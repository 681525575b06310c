#include "primematch/transcript.h"

#include <array>

#include "primematch/sodium_init.h"

namespace primematch {

namespace {

void update_u32(crypto_generichash_state& st, uint32_t v) {
  uint8_t b[4] = {static_cast<uint8_t>(v >> 24), static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 8),
                  static_cast<uint8_t>(v)};
  crypto_generichash_update(&st, b, 4);
}

void update_u64(crypto_generichash_state& st, uint64_t v) {
  uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<uint8_t>(v >> (56 - 8 * i));
  crypto_generichash_update(&st, b, 8);
}

void update_framed(crypto_generichash_state& st, std::string_view label, std::span<const uint8_t> data) {
  update_u32(st, static_cast<uint32_t>(label.size()));
  crypto_generichash_update(&st, reinterpret_cast<const uint8_t*>(label.data()), label.size());
  update_u64(st, data.size());
  crypto_generichash_update(&st, data.data(), data.size());
}

}  // namespace

Transcript::Transcript(std::string_view domain) {
  ensure_sodium();
  crypto_generichash_init(&state_, nullptr, 0, crypto_generichash_BYTES_MAX);
  update_framed(state_, "primematch-transcript-v1", {});
  update_framed(state_, "domain",
                std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(domain.data()), domain.size()));
}

void Transcript::absorb(std::string_view label, std::span<const uint8_t> data) { update_framed(state_, label, data); }

void Transcript::absorb_u64(std::string_view label, uint64_t v) {
  std::array<uint8_t, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<uint8_t>(v >> (56 - 8 * i));
  absorb(label, b);
}

Scalar Transcript::challenge(std::string_view label) {
  crypto_generichash_state fork = state_;
  update_framed(fork, "challenge", std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(label.data()), label.size()));
  std::array<uint8_t, 64> digest{};
  crypto_generichash_final(&fork, digest.data(), digest.size());
  Scalar x = Scalar::from_wide(digest);
  absorb(label, x);
  return x;
}

}  // namespace primematch
