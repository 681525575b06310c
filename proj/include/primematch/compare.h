#pragma once

// Affine-linear comparison. comparison_initial runs over any F_q-module
// ("carrier") given as a small policy struct:
//
//   struct M {
//     using Value = ...;
//     Value add(const Value&, const Value&) const;
//     Value sub(const Value&, const Value&) const;
//     Value scale(const Value&, const Scalar&) const;
//     Value constant(const Scalar&) const;  // embedding of a public constant
//   };
//
// For additive shares only one party embeds constants; the other uses zero.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "primematch/algebra.h"
#include "primematch/errors.h"
#include "primematch/rng.h"

namespace primematch {

struct ComparisonRandomness {
  std::vector<uint32_t> perm;  // bijection on {0..n}
  std::vector<Scalar> s0;      // n+1 nonzero scalars
  std::vector<Scalar> s1;
};

// Stream layout (ChaChaStream keyed by `seed`):
//   1. Fisher-Yates over [0..n]: for i = n..1, j = uniform_below(i + 1),
//      swap(perm[i], perm[j]).
//   2. s0[0..n], then s1[0..n]: each 64 bytes reduced mod q, redrawn if 0.
ComparisonRandomness derive_randomness(const Seed& seed, unsigned n);

template <class V>
struct ComparisonOutput {
  std::vector<V> d0;
  std::vector<V> d1;
};

struct ScalarModule {
  using Value = Scalar;
  bool injects_constants = true;

  Scalar add(const Scalar& a, const Scalar& b) const { return a + b; }
  Scalar sub(const Scalar& a, const Scalar& b) const { return a - b; }
  Scalar scale(const Scalar& a, const Scalar& s) const { return a * s; }
  Scalar constant(const Scalar& c) const { return injects_constants ? c : Scalar(); }
};

// Commitments (or any group encoding m*g): the constant c embeds as c*g, i.e.
// Com(c; 0).
struct PointModule {
  using Value = Point;
  bool injects_constants = true;

  Point add(const Point& a, const Point& b) const { return a + b; }
  Point sub(const Point& a, const Point& b) const { return a - b; }
  Point scale(const Point& a, const Scalar& s) const { return a * s; }
  Point constant(const Scalar& c) const { return injects_constants ? Point::base_mul(c) : Point(); }
};

struct CiphertextModule {
  using Value = Ciphertext;
  Point pk;

  Ciphertext add(const Ciphertext& a, const Ciphertext& b) const { return a + b; }
  Ciphertext sub(const Ciphertext& a, const Ciphertext& b) const { return a - b; }
  Ciphertext scale(const Ciphertext& a, const Scalar& s) const { return a * s; }
  Ciphertext constant(const Scalar& c) const { return elgamal_trivial(pk, c); }
};

template <class M>
ComparisonOutput<typename M::Value> comparison_initial(const M& mod, std::span<const typename M::Value> bits0,
                                                       std::span<const typename M::Value> bits1,
                                                       const ComparisonRandomness& rand) {
  const size_t n = bits0.size();
  if (bits1.size() != n) throw ParameterError("comparison inputs differ in length");
  if (n == 0 || n > 250) throw ParameterError("comparison bit width out of range");
  if (rand.perm.size() != n + 1 || rand.s0.size() != n + 1 || rand.s1.size() != n + 1)
    throw ParameterError("comparison randomness does not match bit width");

  using V = typename M::Value;
  const Scalar one = Scalar::from_u64(1);
  std::vector<V> c0, c1;
  c0.reserve(n + 1);
  c1.reserve(n + 1);
  V acc = mod.constant(Scalar());
  const V plus_one = mod.constant(one);
  const V minus_one = mod.constant(-one);
  for (size_t j = 0; j < n; ++j) {
    V diff = mod.sub(bits0[j], bits1[j]);
    V base = mod.add(diff, acc);
    c0.push_back(mod.add(plus_one, base));
    c1.push_back(mod.add(minus_one, base));
    acc = mod.add(acc, mod.scale(diff, Scalar::pow2(static_cast<unsigned>(2 + j))));
  }
  c0.push_back(acc);
  c1.push_back(acc);

  ComparisonOutput<V> out;
  out.d0.reserve(n + 1);
  out.d1.reserve(n + 1);
  for (size_t j = 0; j <= n; ++j) {
    out.d0.push_back(mod.scale(c0[rand.perm[j]], rand.s0[j]));
    out.d1.push_back(mod.scale(c1[rand.perm[j]], rand.s1[j]));
  }
  return out;
}

// (b0, b1): b_i is true iff some d_i slot is zero.
std::pair<bool, bool> comparison_final(std::span<const Scalar> d0, std::span<const Scalar> d1);

// Plain evaluation of both algorithms; returns (v0 <= v1, v1 <= v0).
std::pair<bool, bool> compare_plain(uint64_t v0, uint64_t v1, unsigned n, const ComparisonRandomness& rand);

std::vector<Scalar> bits_as_scalars(std::span<const uint8_t> bits);

}  // namespace primematch
