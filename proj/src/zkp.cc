#include "primematch/zkp.h"

#include "primematch/errors.h"

namespace primematch {

namespace {

Scalar read_scalar(ByteReader& r) { return Scalar::from_bytes(r.get_raw(Scalar::kSize)); }
Point read_point(ByteReader& r) { return Point::from_bytes(r.get_raw(Point::kSize)); }

void bind_context(Transcript& t, std::span<const uint8_t> context) { t.absorb("context", context); }

constexpr unsigned kMaxOneManyDepth = 16;

}  // namespace

void PedersenKey::bind(Transcript& t) const {
  t.absorb("pedersen.g", params->g);
  t.absorb("pedersen.h", params->h);
}

void ElGamalKey::bind(Transcript& t) const {
  t.absorb("elgamal.g", Point::generator());
  t.absorb("elgamal.pk", pk);
}

// ---------------------------------------------------------------------------
// ComEq

Bytes ComEqProof::encode() const {
  ByteWriter w;
  w.put_raw(k.bytes());
  w.put_raw(s.bytes());
  return std::move(w).bytes();
}

ComEqProof ComEqProof::decode(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  ComEqProof p;
  p.k = read_point(r);
  p.s = read_scalar(r);
  r.expect_done();
  return p;
}

namespace {

Scalar comeq_challenge(const PedersenParams& params, const Point& v0, const Point& v1, const Point& k,
                       std::span<const uint8_t> context) {
  Transcript t("comeq");
  PedersenKey{&params}.bind(t);
  bind_context(t, context);
  t.absorb("v0", v0);
  t.absorb("v1", v1);
  t.absorb("k", k);
  return t.challenge("x");
}

}  // namespace

ComEqProof comeq_prove(const PedersenParams& params, const Commitment& v0, const Commitment& v1, ChaChaStream& rng,
                       std::span<const uint8_t> context) {
  if (!v0.opening || !v1.opening) throw UsageError("comeq_prove needs both openings");
  if (v0.opening->message != v1.opening->message) throw UsageError("comeq_prove on unequal messages");
  Scalar k = Scalar::random(rng);
  ComEqProof p;
  p.k = params.h * k;
  Scalar x = comeq_challenge(params, v0.value, v1.value, p.k, context);
  p.s = (v0.opening->randomness - v1.opening->randomness) * x + k;
  return p;
}

bool comeq_verify(const PedersenParams& params, const ComEqProof& proof, const Point& v0, const Point& v1,
                  std::span<const uint8_t> context) {
  Scalar x = comeq_challenge(params, v0, v1, proof.k, context);
  return params.h * proof.s == (v0 - v1) * x + proof.k;
}

// ---------------------------------------------------------------------------
// CrossEq

Bytes CrossEqProof::encode() const {
  ByteWriter w;
  w.put_raw(t0.bytes());
  w.put_raw(t1.encode());
  w.put_raw(zm.bytes());
  w.put_raw(z0.bytes());
  w.put_raw(zr.bytes());
  return std::move(w).bytes();
}

CrossEqProof CrossEqProof::decode(const Point& pk, std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  CrossEqProof p;
  p.t0 = read_point(r);
  p.t1 = Ciphertext::decode(pk, r.get_raw(Ciphertext::kSize));
  p.zm = read_scalar(r);
  p.z0 = read_scalar(r);
  p.zr = read_scalar(r);
  r.expect_done();
  return p;
}

namespace {

Scalar crosseq_challenge(const PedersenParams& params, const ElGamalKey& key, const Point& v, const Ciphertext& a,
                         const CrossEqProof& p, std::span<const uint8_t> context) {
  Transcript t("crosseq");
  PedersenKey{&params}.bind(t);
  key.bind(t);
  bind_context(t, context);
  t.absorb("v", v);
  t.absorb("a", a);
  t.absorb("t0", p.t0);
  t.absorb("t1", p.t1);
  return t.challenge("x");
}

}  // namespace

CrossEqProof crosseq_prove(const PedersenParams& params, const ElGamalKey& key, const Commitment& v,
                           const OpenedCiphertext& a, ChaChaStream& rng, std::span<const uint8_t> context) {
  if (!v.opening || !a.opening) throw UsageError("crosseq_prove needs both openings");
  if (v.opening->message != a.opening->message) throw UsageError("crosseq_prove on unequal messages");
  Scalar km = Scalar::random(rng), k0 = Scalar::random(rng), kr = Scalar::random(rng);
  CrossEqProof p;
  p.t0 = params.commit(km, k0);
  p.t1 = key.commit(km, kr);
  Scalar x = crosseq_challenge(params, key, v.value, a.value, p, context);
  p.zm = km + x * v.opening->message;
  p.z0 = k0 + x * v.opening->randomness;
  p.zr = kr + x * a.opening->randomness;
  return p;
}

bool crosseq_verify(const PedersenParams& params, const ElGamalKey& key, const CrossEqProof& proof, const Point& v,
                    const Ciphertext& a, std::span<const uint8_t> context) {
  if (a.pk != key.pk || proof.t1.pk != key.pk) return false;
  Scalar x = crosseq_challenge(params, key, v, a, proof, context);
  return params.commit(proof.zm, proof.z0) == proof.t0 + v * x && key.commit(proof.zm, proof.zr) == proof.t1 + a * x;
}

// ---------------------------------------------------------------------------
// BitProof

template <class Key>
Bytes BitProof<Key>::encode(const Key& key) const {
  ByteWriter w;
  key.write(w, a);
  key.write(w, b);
  w.put_raw(f.bytes());
  w.put_raw(za.bytes());
  w.put_raw(zb.bytes());
  return std::move(w).bytes();
}

template <class Key>
BitProof<Key> BitProof<Key>::decode(const Key& key, std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  BitProof p;
  p.a = key.read(r);
  p.b = key.read(r);
  p.f = read_scalar(r);
  p.za = read_scalar(r);
  p.zb = read_scalar(r);
  r.expect_done();
  return p;
}

namespace {

template <class Key>
Scalar bit_challenge(const Key& key, const typename Key::Element& v, const typename Key::Element& a,
                     const typename Key::Element& b, std::span<const uint8_t> context) {
  Transcript t("bitproof");
  key.bind(t);
  bind_context(t, context);
  t.absorb("v", v);
  t.absorb("a", a);
  t.absorb("b", b);
  return t.challenge("x");
}

template <class Key>
BitProof<Key> bit_prove_impl(const Key& key, const Committed<typename Key::Element>& v, ChaChaStream& rng,
                             std::span<const uint8_t> context) {
  const Scalar& m = v.opening->message;
  const Scalar& r = v.opening->randomness;
  Scalar a = Scalar::random(rng), s = Scalar::random(rng), t = Scalar::random(rng);
  BitProof<Key> p;
  p.a = key.commit(a, s);
  p.b = key.commit(a * m, t);
  Scalar x = bit_challenge(key, v.value, p.a, p.b, context);
  p.f = m * x + a;
  p.za = r * x + s;
  p.zb = r * (x - p.f) + t;
  return p;
}

}  // namespace

template <class Key>
BitProof<Key> bitproof_prove(const Key& key, const Committed<typename Key::Element>& v, ChaChaStream& rng,
                             std::span<const uint8_t> context) {
  if (!v.opening) throw UsageError("bitproof_prove needs an opening");
  const Scalar& m = v.opening->message;
  if (!m.is_zero() && m != Scalar::from_u64(1)) throw UsageError("bitproof_prove on a non-bit message");
  return bit_prove_impl(key, v, rng, context);
}

template <class Key>
BitProof<Key> unchecked::bitproof_prove(const Key& key, const Committed<typename Key::Element>& v,
                                        ChaChaStream& rng, std::span<const uint8_t> context) {
  if (!v.opening) throw UsageError("bitproof_prove needs an opening");
  return bit_prove_impl(key, v, rng, context);
}

template <class Key>
bool bitproof_verify(const Key& key, const BitProof<Key>& p, const typename Key::Element& v,
                     std::span<const uint8_t> context) {
  Scalar x = bit_challenge(key, v, p.a, p.b, context);
  return v * x + p.a == key.commit(p.f, p.za) && v * (x - p.f) + p.b == key.commit(Scalar(), p.zb);
}

// ---------------------------------------------------------------------------
// OneMany

unsigned onemany_depth(size_t len) {
  if (len == 0) throw ParameterError("one-out-of-many list is empty");
  unsigned m = 0;
  while ((size_t{1} << m) < len) ++m;
  return m;
}

template <class Key>
Bytes OneManyProof<Key>::encode(const Key& key) const {
  ByteWriter w;
  w.put_u8(static_cast<uint8_t>(m));
  for (const auto* vec : {&cl, &ca, &cb, &g})
    for (const auto& e : *vec) key.write(w, e);
  for (const auto* vec : {&f, &za, &zb})
    for (const auto& s : *vec) w.put_raw(s.bytes());
  if constexpr (std::is_same_v<Key, PedersenKey>) {
    w.put_raw(tail.zd.bytes());
  } else {
    w.put_raw(tail.k1.bytes());
    w.put_raw(tail.k2.bytes());
    w.put_raw(tail.s.bytes());
  }
  return std::move(w).bytes();
}

template <class Key>
OneManyProof<Key> OneManyProof<Key>::decode(const Key& key, std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  OneManyProof p;
  p.m = r.get_u8();
  if (p.m > kMaxOneManyDepth) throw DecodeError("one-out-of-many depth too large");
  for (auto* vec : {&p.cl, &p.ca, &p.cb, &p.g}) {
    vec->reserve(p.m);
    for (unsigned j = 0; j < p.m; ++j) vec->push_back(key.read(r));
  }
  for (auto* vec : {&p.f, &p.za, &p.zb}) {
    vec->reserve(p.m);
    for (unsigned j = 0; j < p.m; ++j) vec->push_back(read_scalar(r));
  }
  if constexpr (std::is_same_v<Key, PedersenKey>) {
    p.tail.zd = read_scalar(r);
  } else {
    p.tail.k1 = read_point(r);
    p.tail.k2 = read_point(r);
    p.tail.s = read_scalar(r);
  }
  r.expect_done();
  return p;
}

namespace {

template <class Key>
Transcript onemany_transcript(const Key& key, std::span<const typename Key::Element> list, const OneManyProof<Key>& p,
                              std::span<const uint8_t> context) {
  Transcript t("onemany");
  key.bind(t);
  bind_context(t, context);
  t.absorb_u64("n", list.size());
  for (const auto& e : list) t.absorb("e", e);
  for (unsigned j = 0; j < p.m; ++j) {
    t.absorb("cl", p.cl[j]);
    t.absorb("ca", p.ca[j]);
    t.absorb("cb", p.cb[j]);
  }
  for (unsigned k = 0; k < p.m; ++k) t.absorb("g", p.g[k]);
  return t;
}

// Multiplies the polynomial `poly` (coefficients, low degree first) by
// (c1*x + c0) in place.
void poly_mul_linear(std::vector<Scalar>& poly, const Scalar& c1, const Scalar& c0) {
  poly.push_back(Scalar());
  for (size_t k = poly.size() - 1; k > 0; --k) poly[k] = poly[k] * c0 + poly[k - 1] * c1;
  poly[0] = poly[0] * c0;
}

template <class Key>
typename Key::Element zero_element(const Key& key) {
  return key.commit(Scalar(), Scalar());
}

// sum_i p_i(x) * E_i - sum_k x^k * G_k with p_i(x) = prod_j f_{j, i_j}, where
// f_{j,1} = f_j and f_{j,0} = x - f_j.
template <class Key>
typename Key::Element onemany_fold(const Key& key, std::span<const typename Key::Element> list,
                                   const OneManyProof<Key>& p, const Scalar& x) {
  const size_t n = size_t{1} << p.m;
  // Build all products prod_j f_{j,i_j} by doubling over the index bits.
  std::vector<Scalar> coeff{Scalar::from_u64(1)};
  coeff.reserve(n);
  for (unsigned j = 0; j < p.m; ++j) {
    const Scalar one = p.f[j];
    const Scalar zero = x - p.f[j];
    const size_t half = coeff.size();
    coeff.resize(2 * half);
    for (size_t i = 0; i < half; ++i) {
      coeff[i + half] = coeff[i] * one;
      coeff[i] = coeff[i] * zero;
    }
  }
  auto acc = zero_element(key);
  for (size_t i = 0; i < n; ++i) acc = acc + list[i] * coeff[i];
  Scalar xk = Scalar::from_u64(1);
  for (unsigned k = 0; k < p.m; ++k) {
    acc = acc - p.g[k] * xk;
    xk = xk * x;
  }
  return acc;
}

void check_list_length(size_t len) {
  unsigned m = onemany_depth(len);
  if ((size_t{1} << m) != len) throw ParameterError("one-out-of-many list length must be a power of two");
  if (m > kMaxOneManyDepth) throw ParameterError("one-out-of-many list too long");
}

template <class Key>
typename Key::Tail prove_tail(const Key& key, Transcript& t, const typename Key::Element& listed,
                              const typename Key::ZeroWitness& w, const Scalar& xm, const Scalar& rho_sum,
                              ChaChaStream& rng);

template <>
PedersenKey::Tail prove_tail(const PedersenKey&, Transcript&, const Point&, const Scalar& r, const Scalar& xm,
                             const Scalar& rho_sum, ChaChaStream&) {
  return PedersenKey::Tail{r * xm - rho_sum};
}

// F = x^m * E_l - (rho_sum*g, rho_sum*pk) is a DH tuple (F1, sk*F1);
// Chaum-Pedersen proves log_g pk = log_F1 F2.
template <>
ElGamalKey::Tail prove_tail(const ElGamalKey& key, Transcript& t, const Ciphertext& listed, const Scalar& sk,
                            const Scalar& xm, const Scalar& rho_sum, ChaChaStream& rng) {
  Ciphertext f = listed * xm - key.commit(Scalar(), rho_sum);
  Scalar k = Scalar::random(rng);
  ElGamalKey::Tail tail;
  tail.k1 = Point::base_mul(k);
  tail.k2 = f.c1 * k;
  t.absorb("tail.k1", tail.k1);
  t.absorb("tail.k2", tail.k2);
  Scalar e = t.challenge("tail.e");
  tail.s = k + e * sk;
  return tail;
}

bool verify_tail(const PedersenKey& key, Transcript&, const Point& f, const PedersenKey::Tail& tail) {
  return f == key.commit(Scalar(), tail.zd);
}

bool verify_tail(const ElGamalKey& key, Transcript& t, const Ciphertext& f, const ElGamalKey::Tail& tail) {
  t.absorb("tail.k1", tail.k1);
  t.absorb("tail.k2", tail.k2);
  Scalar e = t.challenge("tail.e");
  return Point::base_mul(tail.s) == tail.k1 + key.pk * e && f.c1 * tail.s == tail.k2 + f.c2 * e;
}

void check_zero_witness(const PedersenKey& key, const Point& e, const Scalar& r) {
  if (key.commit(Scalar(), r) != e) throw UsageError("onemany_prove: listed element is not Com(0; r)");
}

void check_zero_witness(const ElGamalKey& key, const Ciphertext& e, const Scalar& sk) {
  if (Point::base_mul(sk) != key.pk) throw UsageError("onemany_prove: secret key does not match pk");
  if (!elgamal_is_zero(sk, e)) throw UsageError("onemany_prove: listed ciphertext does not encrypt zero");
}

template <class Key>
OneManyProof<Key> onemany_prove_impl(const Key& key, std::span<const typename Key::Element> list, size_t index,
                                     const typename Key::ZeroWitness& witness, ChaChaStream& rng,
                                     std::span<const uint8_t> context) {
  check_list_length(list.size());
  if (index >= list.size()) throw UsageError("onemany_prove: index out of range");

  OneManyProof<Key> p;
  p.m = onemany_depth(list.size());
  const unsigned m = p.m;
  const size_t n = list.size();

  std::vector<Scalar> lbit(m), r(m), a(m), s(m), t(m), rho(m);
  for (unsigned j = 0; j < m; ++j) {
    lbit[j] = Scalar::from_u64((index >> j) & 1u);
    r[j] = Scalar::random(rng);
    a[j] = Scalar::random(rng);
    s[j] = Scalar::random(rng);
    t[j] = Scalar::random(rng);
    p.cl.push_back(key.commit(lbit[j], r[j]));
    p.ca.push_back(key.commit(a[j], s[j]));
    p.cb.push_back(key.commit(lbit[j] * a[j], t[j]));
  }

  // Coefficients of p_i(x) = prod_j f_{j,i_j}(x) with f_{j,1} = l_j x + a_j
  // and f_{j,0} = (1 - l_j) x - a_j.
  const Scalar one = Scalar::from_u64(1);
  std::vector<std::vector<Scalar>> poly(n);
  for (size_t i = 0; i < n; ++i) {
    poly[i] = {one};
    for (unsigned j = 0; j < m; ++j) {
      if ((i >> j) & 1u)
        poly_mul_linear(poly[i], lbit[j], a[j]);
      else
        poly_mul_linear(poly[i], one - lbit[j], -a[j]);
    }
  }
  for (unsigned k = 0; k < m; ++k) {
    rho[k] = Scalar::random(rng);
    auto gk = key.commit(Scalar(), rho[k]);
    for (size_t i = 0; i < n; ++i) gk = gk + list[i] * poly[i][k];
    p.g.push_back(gk);
  }

  Transcript tr = onemany_transcript(key, list, p, context);
  Scalar x = tr.challenge("x");
  for (unsigned j = 0; j < m; ++j) {
    p.f.push_back(lbit[j] * x + a[j]);
    p.za.push_back(r[j] * x + s[j]);
    p.zb.push_back(r[j] * (x - p.f[j]) + t[j]);
  }
  Scalar xk = one, rho_sum;
  for (unsigned k = 0; k < m; ++k) {
    rho_sum += rho[k] * xk;
    xk *= x;
  }
  p.tail = prove_tail(key, tr, list[index], witness, xk, rho_sum, rng);
  return p;
}

}  // namespace

template <class Key>
OneManyProof<Key> onemany_prove(const Key& key, std::span<const typename Key::Element> list, size_t index,
                                const typename Key::ZeroWitness& witness, ChaChaStream& rng,
                                std::span<const uint8_t> context) {
  check_list_length(list.size());
  if (index >= list.size()) throw UsageError("onemany_prove: index out of range");
  check_zero_witness(key, list[index], witness);
  return onemany_prove_impl(key, list, index, witness, rng, context);
}

template <class Key>
OneManyProof<Key> unchecked::onemany_prove(const Key& key, std::span<const typename Key::Element> list,
                                           size_t index, const typename Key::ZeroWitness& witness,
                                           ChaChaStream& rng, std::span<const uint8_t> context) {
  return onemany_prove_impl(key, list, index, witness, rng, context);
}

template <class Key>
bool onemany_verify(const Key& key, const OneManyProof<Key>& p, std::span<const typename Key::Element> list,
                    std::span<const uint8_t> context) {
  if (list.empty() || (size_t{1} << p.m) != list.size()) return false;
  const size_t m = p.m;
  if (p.cl.size() != m || p.ca.size() != m || p.cb.size() != m || p.g.size() != m || p.f.size() != m ||
      p.za.size() != m || p.zb.size() != m)
    return false;
  Transcript tr = onemany_transcript(key, list, p, context);
  Scalar x = tr.challenge("x");
  for (size_t j = 0; j < m; ++j) {
    if (p.cl[j] * x + p.ca[j] != key.commit(p.f[j], p.za[j])) return false;
    if (p.cl[j] * (x - p.f[j]) + p.cb[j] != key.commit(Scalar(), p.zb[j])) return false;
  }
  return verify_tail(key, tr, onemany_fold(key, list, p, x), p.tail);
}

#define PRIMEMATCH_INSTANTIATE(Key)                                                                                 \
  template struct BitProof<Key>;                                                                                    \
  template struct OneManyProof<Key>;                                                                                \
  template BitProof<Key> bitproof_prove<Key>(const Key&, const Committed<Key::Element>&, ChaChaStream&,             \
                                             std::span<const uint8_t>);                                             \
  template BitProof<Key> unchecked::bitproof_prove<Key>(const Key&, const Committed<Key::Element>&, ChaChaStream&,  \
                                                        std::span<const uint8_t>);                                  \
  template bool bitproof_verify<Key>(const Key&, const BitProof<Key>&, const Key::Element&,                         \
                                     std::span<const uint8_t>);                                                     \
  template OneManyProof<Key> onemany_prove<Key>(const Key&, std::span<const Key::Element>, size_t,                  \
                                                const Key::ZeroWitness&, ChaChaStream&, std::span<const uint8_t>);  \
  template OneManyProof<Key> unchecked::onemany_prove<Key>(const Key&, std::span<const Key::Element>, size_t,       \
                                                           const Key::ZeroWitness&, ChaChaStream&,                  \
                                                           std::span<const uint8_t>);                               \
  template bool onemany_verify<Key>(const Key&, const OneManyProof<Key>&, std::span<const Key::Element>,            \
                                    std::span<const uint8_t>);

PRIMEMATCH_INSTANTIATE(PedersenKey)
PRIMEMATCH_INSTANTIATE(ElGamalKey)

#undef PRIMEMATCH_INSTANTIATE

}  // namespace primematch
