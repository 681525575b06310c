#pragma once

#include <sodium.h>

#include <span>
#include <string_view>

#include "primematch/algebra.h"

namespace primematch {

// Fiat-Shamir transcript over a running BLAKE2b-512 state. Every absorb is
// framed as u32 label length || label || u64 data length || data, so no two
// different absorb sequences feed the hash the same bytes. A challenge hashes
// a copy of the state plus its own label, reduces the 64-byte digest mod q,
// and is then absorbed back so later challenges depend on it.
class Transcript {
 public:
  explicit Transcript(std::string_view domain);

  void absorb(std::string_view label, std::span<const uint8_t> data);
  void absorb(std::string_view label, const Point& p) { absorb(label, p.bytes()); }
  void absorb(std::string_view label, const Scalar& s) { absorb(label, s.bytes()); }
  void absorb(std::string_view label, const Ciphertext& ct) { absorb(label, ct.encode()); }
  void absorb_u64(std::string_view label, uint64_t v);

  Scalar challenge(std::string_view label);

 private:
  crypto_generichash_state state_;
};

}  // namespace primematch
