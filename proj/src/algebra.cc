#include "primematch/algebra.h"

#include <sodium.h>

#include <cstring>

#include "primematch/errors.h"
#include "primematch/sodium_init.h"

namespace primematch {

namespace {

// Group order q, little-endian.
constexpr std::array<uint8_t, 32> kOrder = {0xed, 0xd3, 0xf5, 0x5c, 0x1a, 0x63, 0x12, 0x58, 0xd6, 0x9c, 0xf7,
                                            0xa2, 0xde, 0xf9, 0xde, 0x14, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
                                            0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x10};

bool below_order(std::span<const uint8_t> le) {
  for (int i = 31; i >= 0; --i) {
    if (le[i] != kOrder[i]) return le[i] < kOrder[i];
  }
  return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// Scalar

Scalar Scalar::from_u64(uint64_t v) {
  Scalar s;
  for (int i = 0; i < 8; ++i) s.bytes_[i] = static_cast<uint8_t>(v >> (8 * i));
  return s;
}

Scalar Scalar::from_i64(int64_t v) {
  if (v >= 0) return from_u64(static_cast<uint64_t>(v));
  // Negate in two's complement without overflowing INT64_MIN.
  return -from_u64(static_cast<uint64_t>(-(v + 1)) + 1);
}

Scalar Scalar::pow2(unsigned k) {
  if (k >= 252) throw RangeError("pow2 exponent too large");
  Scalar s;
  s.bytes_[k / 8] = static_cast<uint8_t>(1u << (k % 8));
  return s;
}

Scalar Scalar::from_bytes(std::span<const uint8_t> bytes) {
  if (bytes.size() != kSize) throw DecodeError("scalar must be 32 bytes");
  if (!below_order(bytes)) throw DecodeError("non-canonical scalar");
  Scalar s;
  std::memcpy(s.bytes_.data(), bytes.data(), kSize);
  return s;
}

Scalar Scalar::from_wide(std::span<const uint8_t, 64> bytes) {
  ensure_sodium();
  Scalar s;
  std::array<uint8_t, 64> tmp{};
  std::memcpy(tmp.data(), bytes.data(), 64);
  crypto_core_ristretto255_scalar_reduce(s.bytes_.data(), tmp.data());
  return s;
}

Scalar Scalar::random(ChaChaStream& rng) {
  std::array<uint8_t, 64> wide{};
  rng.fill(wide);
  return from_wide(wide);
}

Scalar Scalar::random_nonzero(ChaChaStream& rng) {
  while (true) {
    Scalar s = random(rng);
    if (!s.is_zero()) return s;
  }
}

bool Scalar::is_zero() const { return sodium_is_zero(bytes_.data(), kSize) == 1; }

std::optional<uint64_t> Scalar::to_u64() const {
  for (size_t i = 8; i < kSize; ++i)
    if (bytes_[i] != 0) return std::nullopt;
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes_[i];
  return v;
}

Scalar Scalar::operator+(const Scalar& o) const {
  Scalar r;
  crypto_core_ristretto255_scalar_add(r.bytes_.data(), bytes_.data(), o.bytes_.data());
  return r;
}

Scalar Scalar::operator-(const Scalar& o) const {
  Scalar r;
  crypto_core_ristretto255_scalar_sub(r.bytes_.data(), bytes_.data(), o.bytes_.data());
  return r;
}

Scalar Scalar::operator*(const Scalar& o) const {
  Scalar r;
  crypto_core_ristretto255_scalar_mul(r.bytes_.data(), bytes_.data(), o.bytes_.data());
  return r;
}

Scalar Scalar::operator-() const {
  Scalar r;
  crypto_core_ristretto255_scalar_negate(r.bytes_.data(), bytes_.data());
  return r;
}

Scalar Scalar::inverse() const {
  Scalar r;
  if (crypto_core_ristretto255_scalar_invert(r.bytes_.data(), bytes_.data()) != 0)
    throw UsageError("inverse of zero scalar");
  return r;
}

// ---------------------------------------------------------------------------
// Point

Point Point::generator() {
  static const Point g = base_mul(Scalar::from_u64(1));
  return g;
}

Point Point::base_mul(const Scalar& s) {
  ensure_sodium();
  Point p;
  // Returns -1 (and writes the identity) when s == 0.
  if (crypto_scalarmult_ristretto255_base(p.bytes_.data(), s.bytes().data()) != 0) return Point();
  return p;
}

Point Point::from_bytes(std::span<const uint8_t> bytes) {
  ensure_sodium();
  if (bytes.size() != kSize) throw DecodeError("point must be 32 bytes");
  // libsodium 1.0.18 ignores bit 255 when checking canonicity.
  if ((bytes[31] & 0x80) != 0 || crypto_core_ristretto255_is_valid_point(bytes.data()) != 1)
    throw DecodeError("invalid point encoding");
  Point p;
  std::memcpy(p.bytes_.data(), bytes.data(), kSize);
  return p;
}

Point Point::hash_to_group(std::span<const uint8_t> data) {
  ensure_sodium();
  std::array<uint8_t, crypto_core_ristretto255_HASHBYTES> digest{};
  crypto_generichash(digest.data(), digest.size(), data.data(), data.size(), nullptr, 0);
  Point p;
  crypto_core_ristretto255_from_hash(p.bytes_.data(), digest.data());
  return p;
}

bool Point::is_identity() const { return sodium_is_zero(bytes_.data(), kSize) == 1; }

Point Point::operator+(const Point& o) const {
  Point r;
  if (crypto_core_ristretto255_add(r.bytes_.data(), bytes_.data(), o.bytes_.data()) != 0)
    throw DecodeError("invalid point in addition");
  return r;
}

Point Point::operator-(const Point& o) const {
  Point r;
  if (crypto_core_ristretto255_sub(r.bytes_.data(), bytes_.data(), o.bytes_.data()) != 0)
    throw DecodeError("invalid point in subtraction");
  return r;
}

Point Point::operator-() const { return Point() - *this; }

Point Point::operator*(const Scalar& s) const {
  if (s.is_zero() || is_identity()) return Point();
  Point r;
  // -1 only signals an identity result.
  if (crypto_scalarmult_ristretto255(r.bytes_.data(), s.bytes().data(), bytes_.data()) != 0) return Point();
  return r;
}

// ---------------------------------------------------------------------------

std::vector<uint8_t> bit_decompose(uint64_t v, unsigned n) {
  if (n == 0 || n > 63) throw RangeError("bit width must be in [1, 63]");
  if (v >> n) throw RangeError("value " + std::to_string(v) + " does not fit in " + std::to_string(n) + " bits");
  std::vector<uint8_t> bits(n);
  for (unsigned j = 0; j < n; ++j) bits[j] = static_cast<uint8_t>((v >> (n - 1 - j)) & 1u);
  return bits;
}

uint64_t bit_recompose(std::span<const uint8_t> bits) {
  uint64_t v = 0;
  for (uint8_t b : bits) v = (v << 1) | (b & 1u);
  return v;
}

bool comparison_bound_holds(unsigned n) {
  // 2 + 4*(2^n - 1) = 2^(n+2) - 2 and 2^252 < q < 2^253, so the bound holds
  // exactly when n + 2 <= 252.
  return n >= 1 && n <= 250;
}

// ---------------------------------------------------------------------------
// Pedersen

PedersenParams PedersenParams::derive(std::string_view tag) {
  PedersenParams p;
  p.g = Point::generator();
  Bytes seed(p.g.bytes().begin(), p.g.bytes().end());
  seed.insert(seed.end(), tag.begin(), tag.end());
  p.h = Point::hash_to_group(seed);
  return p;
}

const PedersenParams& PedersenParams::standard() {
  static const PedersenParams params = derive(kPedersenTag);
  return params;
}

Commitment pedersen_commit(const PedersenParams& params, const Scalar& m, const Scalar& r) {
  return Commitment{params.commit(m, r), Opening{m, r}};
}

bool pedersen_opens(const PedersenParams& params, const Point& c, const Opening& opening) {
  return params.commit(opening.message, opening.randomness) == c;
}

// ---------------------------------------------------------------------------
// ElGamal

namespace {
void require_same_key(const Point& a, const Point& b) {
  if (a != b) throw UsageError("ciphertexts under different public keys");
}
}  // namespace

Ciphertext Ciphertext::operator+(const Ciphertext& o) const {
  require_same_key(pk, o.pk);
  return Ciphertext{pk, c1 + o.c1, c2 + o.c2};
}

Ciphertext Ciphertext::operator-(const Ciphertext& o) const {
  require_same_key(pk, o.pk);
  return Ciphertext{pk, c1 - o.c1, c2 - o.c2};
}

Ciphertext Ciphertext::operator*(const Scalar& s) const { return Ciphertext{pk, c1 * s, c2 * s}; }

std::array<uint8_t, Ciphertext::kSize> Ciphertext::encode() const {
  std::array<uint8_t, kSize> out{};
  std::memcpy(out.data(), c1.bytes().data(), Point::kSize);
  std::memcpy(out.data() + Point::kSize, c2.bytes().data(), Point::kSize);
  return out;
}

Ciphertext Ciphertext::decode(const Point& pk, std::span<const uint8_t> bytes) {
  if (bytes.size() != kSize) throw DecodeError("ciphertext must be 64 bytes");
  return Ciphertext{pk, Point::from_bytes(bytes.subspan(0, Point::kSize)),
                    Point::from_bytes(bytes.subspan(Point::kSize, Point::kSize))};
}

ElGamalKeypair ElGamalKeypair::generate(ChaChaStream& rng) {
  Scalar sk = Scalar::random_nonzero(rng);
  return ElGamalKeypair{sk, Point::base_mul(sk)};
}

Ciphertext elgamal_encrypt(const Point& pk, const Scalar& m, const Scalar& r) {
  return Ciphertext{pk, Point::base_mul(r), pk * r + Point::base_mul(m)};
}

Ciphertext elgamal_trivial(const Point& pk, const Scalar& m) {
  return Ciphertext{pk, Point::identity(), Point::base_mul(m)};
}

bool elgamal_is_zero(const Scalar& sk, const Ciphertext& ct) { return ct.c1 * sk == ct.c2; }

Ciphertext ct_scale_add(const Point& pk, std::span<const Ciphertext> cts, std::span<const Scalar> scalars,
                        const Scalar& constant, ChaChaStream& rng) {
  if (cts.size() != scalars.size()) throw UsageError("ct_scale_add: ciphertext/scalar count mismatch");
  Ciphertext acc = elgamal_encrypt(pk, constant, Scalar::random(rng));
  for (size_t i = 0; i < cts.size(); ++i) {
    require_same_key(pk, cts[i].pk);
    acc = acc + cts[i] * scalars[i];
  }
  return acc;
}

}  // namespace primematch
