#pragma once

// Field and group arithmetic over ristretto255 (prime order
// q = 2^252 + 27742317777372353535851937790883648493), Pedersen commitments
// and exponent ElGamal. Group law is written additively: a commitment is
// m*G + r*H.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "primematch/bytes.h"
#include "primematch/rng.h"

namespace primematch {

class Scalar {
 public:
  static constexpr size_t kSize = 32;

  Scalar() = default;  // zero

  static Scalar from_u64(uint64_t v);
  static Scalar from_i64(int64_t v);
  static Scalar pow2(unsigned k);
  // Canonical little-endian encoding (< q); anything else is a DecodeError.
  static Scalar from_bytes(std::span<const uint8_t> bytes);
  // Reduces 64 uniform bytes mod q.
  static Scalar from_wide(std::span<const uint8_t, 64> bytes);
  static Scalar random(ChaChaStream& rng);
  static Scalar random_nonzero(ChaChaStream& rng);

  const std::array<uint8_t, kSize>& bytes() const { return bytes_; }
  bool is_zero() const;
  // The value as an integer when it is below 2^64.
  std::optional<uint64_t> to_u64() const;

  Scalar operator+(const Scalar& o) const;
  Scalar operator-(const Scalar& o) const;
  Scalar operator*(const Scalar& o) const;
  Scalar operator-() const;
  Scalar& operator+=(const Scalar& o) { return *this = *this + o; }
  Scalar& operator-=(const Scalar& o) { return *this = *this - o; }
  Scalar& operator*=(const Scalar& o) { return *this = *this * o; }
  Scalar inverse() const;  // throws UsageError on zero

  bool operator==(const Scalar& o) const = default;

 private:
  std::array<uint8_t, kSize> bytes_{};
};

class Point {
 public:
  static constexpr size_t kSize = 32;

  Point() = default;  // identity (encodes as 32 zero bytes)

  static Point identity() { return Point(); }
  static Point generator();
  static Point base_mul(const Scalar& s);  // s*G
  // Canonical ristretto255 encoding; non-canonical bytes are a DecodeError.
  static Point from_bytes(std::span<const uint8_t> bytes);
  // Elligator map from a 64-byte BLAKE2b digest of `data`.
  static Point hash_to_group(std::span<const uint8_t> data);

  const std::array<uint8_t, kSize>& bytes() const { return bytes_; }
  bool is_identity() const;

  Point operator+(const Point& o) const;
  Point operator-(const Point& o) const;
  Point operator-() const;
  Point operator*(const Scalar& s) const;
  Point& operator+=(const Point& o) { return *this = *this + o; }
  Point& operator-=(const Point& o) { return *this = *this - o; }
  Point dbl() const { return *this + *this; }

  bool operator==(const Point& o) const = default;

 private:
  std::array<uint8_t, kSize> bytes_{};
};

inline Point operator*(const Scalar& s, const Point& p) { return p * s; }

// Big-endian decomposition: bits[0] is the most significant bit and
// v = sum_j 2^(n-1-j) * bits[j]. Requires 0 <= v < 2^n (n <= 63).
std::vector<uint8_t> bit_decompose(uint64_t v, unsigned n);
uint64_t bit_recompose(std::span<const uint8_t> bits);

// Bit width n is usable by the comparison when 2 + 4*(2^n - 1) < q.
bool comparison_bound_holds(unsigned n);

// ---------------------------------------------------------------------------
// Pedersen commitments.

struct PedersenParams {
  Point g;
  Point h;

  // g = ristretto255 base point, h = hash_to_group(encode(g) || tag).
  static const PedersenParams& standard();
  static PedersenParams derive(std::string_view tag);

  Point commit(const Scalar& m, const Scalar& r) const { return Point::base_mul(m) + h * r; }
};

inline constexpr std::string_view kPedersenTag = "primematch-pedersen-h";

struct Opening {
  Scalar message;
  Scalar randomness;
  bool operator==(const Opening&) const = default;
};

// A statement element (a point or a ciphertext) with the prover-side opening
// attached when known. Sums and scalar multiples carry openings through.
template <class E>
struct Committed {
  E value;
  std::optional<Opening> opening;

  Committed operator+(const Committed& o) const {
    Committed out{value + o.value, std::nullopt};
    if (opening && o.opening)
      out.opening = Opening{opening->message + o.opening->message, opening->randomness + o.opening->randomness};
    return out;
  }
  Committed operator-(const Committed& o) const {
    Committed out{value - o.value, std::nullopt};
    if (opening && o.opening)
      out.opening = Opening{opening->message - o.opening->message, opening->randomness - o.opening->randomness};
    return out;
  }
  Committed scaled(const Scalar& s) const {
    Committed out{value * s, std::nullopt};
    if (opening) out.opening = Opening{opening->message * s, opening->randomness * s};
    return out;
  }
};

using Commitment = Committed<Point>;

Commitment pedersen_commit(const PedersenParams& params, const Scalar& m, const Scalar& r);
bool pedersen_opens(const PedersenParams& params, const Point& c, const Opening& opening);

// ---------------------------------------------------------------------------
// Exponent ElGamal: Enc(m; r) = (r*G, r*pk + m*G).

struct Ciphertext {
  static constexpr size_t kSize = 2 * Point::kSize;

  Point pk;  // key the ciphertext is under; not part of the wire encoding
  Point c1;
  Point c2;

  Ciphertext operator+(const Ciphertext& o) const;
  Ciphertext operator-(const Ciphertext& o) const;
  Ciphertext operator*(const Scalar& s) const;

  // c1 || c2.
  std::array<uint8_t, kSize> encode() const;
  static Ciphertext decode(const Point& pk, std::span<const uint8_t> bytes);

  bool operator==(const Ciphertext&) const = default;
};

using OpenedCiphertext = Committed<Ciphertext>;

struct ElGamalKeypair {
  Scalar sk;
  Point pk;

  static ElGamalKeypair generate(ChaChaStream& rng);
};

Ciphertext elgamal_encrypt(const Point& pk, const Scalar& m, const Scalar& r);
// Encryption of a public constant with zero randomness: (0, m*G).
Ciphertext elgamal_trivial(const Point& pk, const Scalar& m);
// True iff the plaintext exponent is 0, i.e. c2 == sk*c1.
bool elgamal_is_zero(const Scalar& sk, const Ciphertext& ct);

// Encrypts constant + sum_i scalars[i]*m_i, re-randomized with a fresh
// encryption of zero drawn from `rng`. All inputs must be under `pk`.
Ciphertext ct_scale_add(const Point& pk, std::span<const Ciphertext> cts, std::span<const Scalar> scalars,
                        const Scalar& constant, ChaChaStream& rng);

}  // namespace primematch
