#pragma once

// Non-interactive sigma proofs over two commitment schemes:
//   PedersenKey:  Com(m; r) = m*g + r*h
//   ElGamalKey:   Com(m; r) = Enc(pk, m; r) = (r*g, r*pk + m*g)
// The bit proof and one-out-of-many proof follow Groth-Kohlweiss and are
// written once against either key. Byte layouts are in docs/wire-format.md.

#include <optional>
#include <span>
#include <vector>

#include "primematch/algebra.h"
#include "primematch/bytes.h"
#include "primematch/rng.h"
#include "primematch/transcript.h"

namespace primematch {

struct PedersenKey {
  using Element = Point;
  // Knowledge that makes a listed element "open to zero": its randomness r.
  using ZeroWitness = Scalar;
  struct Tail {
    Scalar zd;
  };

  const PedersenParams* params = &PedersenParams::standard();

  Point commit(const Scalar& m, const Scalar& r) const { return params->commit(m, r); }
  void bind(Transcript& t) const;
  static constexpr size_t kElementSize = Point::kSize;
  void write(ByteWriter& w, const Point& e) const { w.put_raw(e.bytes()); }
  Point read(ByteReader& r) const { return Point::from_bytes(r.get_raw(Point::kSize)); }
};

struct ElGamalKey {
  using Element = Ciphertext;
  // The decryption key: a zero ciphertext is a Diffie-Hellman tuple under it.
  using ZeroWitness = Scalar;
  struct Tail {
    Point k1;
    Point k2;
    Scalar s;
  };

  Point pk;

  Ciphertext commit(const Scalar& m, const Scalar& r) const { return elgamal_encrypt(pk, m, r); }
  void bind(Transcript& t) const;
  static constexpr size_t kElementSize = Ciphertext::kSize;
  void write(ByteWriter& w, const Ciphertext& e) const { w.put_raw(e.encode()); }
  Ciphertext read(ByteReader& r) const { return Ciphertext::decode(pk, r.get_raw(Ciphertext::kSize)); }
};

// ---------------------------------------------------------------------------
// Commitment equality between two Pedersen commitments: a Schnorr proof of
// knowledge of r0 - r1 with V0 - V1 = (r0 - r1)*h.

struct ComEqProof {
  static constexpr size_t kSize = Point::kSize + Scalar::kSize;

  Point k;
  Scalar s;

  Bytes encode() const;
  static ComEqProof decode(std::span<const uint8_t> bytes);
};

ComEqProof comeq_prove(const PedersenParams& params, const Commitment& v0, const Commitment& v1, ChaChaStream& rng,
                       std::span<const uint8_t> context = {});
bool comeq_verify(const PedersenParams& params, const ComEqProof& proof, const Point& v0, const Point& v1,
                  std::span<const uint8_t> context = {});

// ---------------------------------------------------------------------------
// Equality of the message inside a Pedersen commitment V and an ElGamal
// ciphertext A.

struct CrossEqProof {
  static constexpr size_t kSize = Point::kSize + Ciphertext::kSize + 3 * Scalar::kSize;

  Point t0;
  Ciphertext t1;
  Scalar zm;
  Scalar z0;
  Scalar zr;

  Bytes encode() const;
  static CrossEqProof decode(const Point& pk, std::span<const uint8_t> bytes);
};

CrossEqProof crosseq_prove(const PedersenParams& params, const ElGamalKey& key, const Commitment& v,
                           const OpenedCiphertext& a, ChaChaStream& rng, std::span<const uint8_t> context = {});
bool crosseq_verify(const PedersenParams& params, const ElGamalKey& key, const CrossEqProof& proof, const Point& v,
                    const Ciphertext& a, std::span<const uint8_t> context = {});

// ---------------------------------------------------------------------------
// Bit proof: V commits to 0 or 1.

template <class Key>
struct BitProof {
  static constexpr size_t kSize = 2 * Key::kElementSize + 3 * Scalar::kSize;

  typename Key::Element a;
  typename Key::Element b;
  Scalar f;
  Scalar za;
  Scalar zb;

  Bytes encode(const Key& key) const;
  static BitProof decode(const Key& key, std::span<const uint8_t> bytes);
};

template <class Key>
BitProof<Key> bitproof_prove(const Key& key, const Committed<typename Key::Element>& v, ChaChaStream& rng,
                             std::span<const uint8_t> context = {});
template <class Key>
bool bitproof_verify(const Key& key, const BitProof<Key>& proof, const typename Key::Element& v,
                     std::span<const uint8_t> context = {});

// ---------------------------------------------------------------------------
// One-out-of-many proof: some element of a public list of N = 2^m commitments
// opens to zero.

template <class Key>
struct OneManyProof {
  unsigned m = 0;
  std::vector<typename Key::Element> cl;
  std::vector<typename Key::Element> ca;
  std::vector<typename Key::Element> cb;
  std::vector<typename Key::Element> g;
  std::vector<Scalar> f;
  std::vector<Scalar> za;
  std::vector<Scalar> zb;
  typename Key::Tail tail;

  Bytes encode(const Key& key) const;
  static OneManyProof decode(const Key& key, std::span<const uint8_t> bytes);
};

template <class Key>
OneManyProof<Key> onemany_prove(const Key& key, std::span<const typename Key::Element> list, size_t index,
                                const typename Key::ZeroWitness& witness, ChaChaStream& rng,
                                std::span<const uint8_t> context = {});
template <class Key>
bool onemany_verify(const Key& key, const OneManyProof<Key>& proof, std::span<const typename Key::Element> list,
                    std::span<const uint8_t> context = {});

// Smallest m with 2^m >= len (len >= 1).
unsigned onemany_depth(size_t len);

namespace unchecked {

// Runs the bit-proof prover without checking that the message is a bit. Used
// by soundness tests to produce the proof a cheating prover would send.
template <class Key>
BitProof<Key> bitproof_prove(const Key& key, const Committed<typename Key::Element>& v, ChaChaStream& rng,
                             std::span<const uint8_t> context = {});

// One-out-of-many prover without the witness check: proves for whatever
// element sits at `index`, zero or not.
template <class Key>
OneManyProof<Key> onemany_prove(const Key& key, std::span<const typename Key::Element> list, size_t index,
                                const typename Key::ZeroWitness& witness, ChaChaStream& rng,
                                std::span<const uint8_t> context = {});

}  // namespace unchecked

}  // namespace primematch
