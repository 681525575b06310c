#include "primematch/mpc.h"

#include <sodium.h>

#include <algorithm>
#include <array>

namespace primematch {

namespace {

constexpr size_t kMaxInstances = 1u << 16;

Bytes proof_context(uint64_t session, uint32_t instance, uint8_t role, std::string_view purpose,
                    uint32_t slot = 0) {
  ByteWriter w;
  w.put_u64(session);
  w.put_u32(instance);
  w.put_u8(role);
  w.put_string(purpose);
  w.put_u32(slot);
  return std::move(w).bytes();
}

void put(ByteWriter& w, const Point& p) { w.put_raw(p.bytes()); }
void put(ByteWriter& w, const Scalar& s) { w.put_raw(s.bytes()); }
Point get_point(ByteReader& r) { return Point::from_bytes(r.get_raw(Point::kSize)); }
Scalar get_scalar(ByteReader& r) { return Scalar::from_bytes(r.get_raw(Scalar::kSize)); }

void put_scalars(ByteWriter& w, std::span<const Scalar> v) {
  for (const auto& s : v) put(w, s);
}
std::vector<Scalar> get_scalars(ByteReader& r, size_t n) {
  std::vector<Scalar> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) out.push_back(get_scalar(r));
  return out;
}
void put_points(ByteWriter& w, std::span<const Point> v) {
  for (const auto& p : v) put(w, p);
}
std::vector<Point> get_points(ByteReader& r, size_t n) {
  std::vector<Point> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) out.push_back(get_point(r));
  return out;
}

[[noreturn]] void fail(const SessionIo& io, AbortReason reason, const std::string& detail) {
  throw ProtocolAbort(reason, io.session(), detail);
}

// Runs a protocol body; on abort tells `notify` and rethrows. Undecodable
// input counts as a malformed message.
template <class F>
auto guarded(SessionIo& io, std::vector<PartyId> notify, F&& body) {
  try {
    try {
      return body();
    } catch (const DecodeError& e) {
      throw ProtocolAbort(AbortReason::MalformedMessage, io.session(), e.what());
    }
  } catch (const ProtocolAbort& a) {
    io.notify_abort(a, notify);
    throw;
  }
}

uint32_t read_instance(const SessionIo& io, ByteReader& r, size_t expected) {
  uint32_t k = r.get_u32();
  if (k != expected)
    fail(io, AbortReason::MalformedMessage, "instance " + std::to_string(k) + " where " + std::to_string(expected) +
                                                " was expected");
  return k;
}

// sum_j 2^(n-1-j) * items[j]
Point weighted_sum(std::span<const Point> items) {
  Point acc;
  for (const auto& p : items) acc = acc.dbl() + p;
  return acc;
}
Scalar weighted_sum(std::span<const Scalar> items) {
  const Scalar two = Scalar::from_u64(2);
  Scalar acc;
  for (const auto& s : items) acc = acc * two + s;
  return acc;
}

template <class E>
std::vector<E> pad_pow2(std::vector<E> list) {
  size_t len = size_t{1} << onemany_depth(list.size());
  while (list.size() < len) list.push_back(list.back());
  return list;
}

void check_width(const SessionIo& io, unsigned n) {
  if (n == 0 || n > 63) fail(io, AbortReason::MalformedMessage, "bit width " + std::to_string(n));
}

std::array<uint8_t, 32> coin_commitment(const Seed& s0, const Seed& nonce) {
  static constexpr std::string_view kTag = "primematch-coin-v1";
  std::array<uint8_t, 32> out;
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, out.size());
  crypto_generichash_update(&st, reinterpret_cast<const uint8_t*>(kTag.data()), kTag.size());
  crypto_generichash_update(&st, s0.data(), s0.size());
  crypto_generichash_update(&st, nonce.data(), nonce.size());
  crypto_generichash_final(&st, out.data(), out.size());
  return out;
}

}  // namespace

std::string_view security_mode_name(SecurityMode m) {
  return m == SecurityMode::SemiHonest ? "semi-honest" : "malicious";
}

SecurityMode security_mode_from_name(std::string_view name) {
  if (name == "semi-honest" || name == "semihonest") return SecurityMode::SemiHonest;
  if (name == "malicious") return SecurityMode::Malicious;
  throw ParameterError("unknown security mode '" + std::string(name) + "'");
}

std::string_view tamper_kind_name(ClientTamper::Kind k) {
  switch (k) {
    case ClientTamper::Kind::None: return "none";
    case ClientTamper::Kind::ShareFlip: return "share-flip";
    case ClientTamper::Kind::RandomnessFlip: return "randomness-flip";
    case ClientTamper::Kind::NonBit: return "non-bit";
    case ClientTamper::Kind::ComEqMismatch: return "comeq-mismatch";
    case ClientTamper::Kind::StatementSwap: return "statement-swap";
    case ClientTamper::Kind::BadOpening: return "bad-opening";
    case ClientTamper::Kind::BadCoinOpen: return "bad-coin-open";
    case ClientTamper::Kind::BadReveal: return "bad-reveal";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// SessionIo

SessionIo::SessionIo(Endpoint& ep, uint64_t session, uint64_t auction, std::chrono::milliseconds timeout)
    : ep_(ep), session_(session), auction_(auction), timeout_(timeout) {}

void SessionIo::send(PartyId to, MsgType type, Bytes payload) {
  Envelope e;
  e.type = type;
  e.session = session_;
  e.auction = auction_;
  e.recipient = to;
  e.flags = type == MsgType::Sealed ? Envelope::kSealedFlag : 0;
  e.payload = std::move(payload);
  ep_.send(std::move(e));
}

void SessionIo::raise_remote(const Envelope& e) {
  abort_reporter_ = e.sender;
  try {
    ByteReader r(e.payload);
    auto reason = static_cast<AbortReason>(r.get_u8());
    PartyId origin = r.get_u32();
    std::string detail = r.get_string();
    if (reason == AbortReason::None || reason > AbortReason::RouteError) reason = AbortReason::PeerAborted;
    throw ProtocolAbort(reason, session_, "reported by party " + std::to_string(origin) + ": " + detail);
  } catch (const DecodeError&) {
    throw ProtocolAbort(AbortReason::PeerAborted, session_, "undecodable abort from party " + std::to_string(e.sender));
  }
}

Envelope SessionIo::next_from(PartyId from) {
  for (const auto& e : pending_)
    if (e.type == MsgType::Abort) raise_remote(e);
  auto it = std::find_if(pending_.begin(), pending_.end(), [&](const Envelope& e) { return e.sender == from; });
  if (it != pending_.end()) {
    Envelope e = std::move(*it);
    pending_.erase(it);
    return e;
  }
  for (;;) {
    Envelope e = ep_.recv(session_, timeout_);
    if (e.type == MsgType::Abort) raise_remote(e);
    if (e.sender == from) return e;
    pending_.push_back(std::move(e));
  }
}

Bytes SessionIo::recv(PartyId from, MsgType type) {
  Envelope e = next_from(from);
  if (e.type != type)
    fail(*this, AbortReason::MalformedMessage,
         "expected " + std::string(msg_type_name(type)) + " from party " + std::to_string(from) + ", got " +
             std::string(msg_type_name(e.type)));
  return std::move(e.payload);
}

namespace {

Bytes sealed_ad(uint64_t session, uint64_t auction, PartyId from, PartyId to) {
  ByteWriter w;
  w.put_string("primematch-sealed");
  w.put_u64(session);
  w.put_u64(auction);
  w.put_u32(from);
  w.put_u32(to);
  return std::move(w).bytes();
}

}  // namespace

void SessionIo::establish_channel(PartyId peer, bool initiator, ChaChaStream& rng, std::span<const uint8_t> psk) {
  peer_ = peer;
  Handshake hs(initiator, session_, rng, psk);
  if (initiator) {
    send(peer, MsgType::Handshake1, hs.hello());
    Bytes m2 = recv(peer, MsgType::Handshake2);
    send(peer, MsgType::Handshake3, hs.finish(m2));
  } else {
    Bytes m1 = recv(peer, MsgType::Handshake1);
    send(peer, MsgType::Handshake2, hs.respond(m1));
    hs.confirm(recv(peer, MsgType::Handshake3));
  }
  channel_ = hs.channel();
}

void SessionIo::send_sealed(MsgType inner, const Bytes& payload) {
  if (!channel_) throw UsageError("no channel established");
  ByteWriter w;
  w.put_u16(static_cast<uint16_t>(inner));
  w.put_raw(payload);
  send(peer_, MsgType::Sealed, channel_->seal(w.bytes(), sealed_ad(session_, auction_, self(), peer_)));
}

Bytes SessionIo::recv_sealed(MsgType inner) {
  if (!channel_) throw UsageError("no channel established");
  Bytes ct = recv(peer_, MsgType::Sealed);
  Bytes pt = channel_->open(ct, sealed_ad(session_, auction_, peer_, self()), session_);
  ByteReader r(pt);
  uint16_t type = r.get_u16();
  if (type != static_cast<uint16_t>(inner))
    fail(*this, AbortReason::MalformedMessage, "unexpected sealed message type " + std::to_string(type));
  auto rest = r.get_raw(r.remaining());
  return Bytes(rest.begin(), rest.end());
}

void SessionIo::notify_abort(const ProtocolAbort& a, std::span<const PartyId> to) {
  ByteWriter w;
  w.put_u8(static_cast<uint8_t>(a.reason()));
  w.put_u32(self());
  w.put_string(std::string(a.what()).substr(0, 1024));
  for (PartyId p : to) {
    if (abort_reporter_ && *abort_reporter_ == p) continue;
    try {
      send(p, MsgType::Abort, w.bytes());
    } catch (const std::exception&) {
      // The party may already be gone; nothing else to tell it.
    }
  }
}

// ---------------------------------------------------------------------------

Seed coin_toss(SessionIo& io, bool initiator, ChaChaStream& rng, bool corrupt_opening) {
  Seed seed{};
  if (initiator) {
    Seed s0 = rng.next_seed();
    Seed nonce = rng.next_seed();
    auto c = coin_commitment(s0, nonce);
    io.send_sealed(MsgType::CoinCommit, Bytes(c.begin(), c.end()));
    Bytes s1 = io.recv_sealed(MsgType::CoinReveal);
    if (s1.size() != seed.size()) fail(io, AbortReason::MalformedMessage, "coin reveal size");
    Seed opened = s0;
    if (corrupt_opening) opened[0] ^= 1;
    ByteWriter w;
    w.put_raw(opened);
    w.put_raw(nonce);
    io.send_sealed(MsgType::CoinOpen, std::move(w).bytes());
    for (size_t i = 0; i < seed.size(); ++i) seed[i] = s0[i] ^ s1[i];
  } else {
    Bytes c = io.recv_sealed(MsgType::CoinCommit);
    if (c.size() != 32) fail(io, AbortReason::MalformedMessage, "coin commitment size");
    Seed s1 = rng.next_seed();
    io.send_sealed(MsgType::CoinReveal, Bytes(s1.begin(), s1.end()));
    Bytes open = io.recv_sealed(MsgType::CoinOpen);
    if (open.size() != 64) fail(io, AbortReason::MalformedMessage, "coin opening size");
    Seed s0, nonce;
    std::copy_n(open.begin(), 32, s0.begin());
    std::copy_n(open.begin() + 32, 32, nonce.begin());
    auto expect = coin_commitment(s0, nonce);
    if (!std::equal(expect.begin(), expect.end(), c.begin()))
      fail(io, AbortReason::CoinTossInvalid, "coin opening does not match commitment");
    for (size_t i = 0; i < seed.size(); ++i) seed[i] = s0[i] ^ s1[i];
  }
  return seed;
}

Seed instance_seed(const Seed& session_seed, uint32_t index, std::string_view label) {
  ByteWriter w;
  w.put_u32(index);
  w.put_string(label);
  return derive_seed(session_seed, "primematch-instance", w.bytes());
}

// ---------------------------------------------------------------------------
// PairStart

Bytes PairStart::encode() const {
  ByteWriter w;
  w.put_u64(session);
  w.put_u8(static_cast<uint8_t>(mode));
  w.put_u8(role);
  w.put_u32(peer);
  w.put_u8(static_cast<uint8_t>(n));
  w.put_u8(bank_pk ? 1 : 0);
  if (bank_pk) put(w, *bank_pk);
  w.put_u32(static_cast<uint32_t>(instances.size()));
  for (const auto& inst : instances) {
    w.put_string(inst.label);
    if (mode == SecurityMode::Malicious && !bank_pk) {
      put(w, inst.v0);
      put(w, inst.v1);
    }
  }
  return std::move(w).bytes();
}

PairStart PairStart::decode(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  PairStart s;
  s.session = r.get_u64();
  uint8_t mode = r.get_u8();
  if (mode > 1) throw DecodeError("unknown security mode");
  s.mode = static_cast<SecurityMode>(mode);
  s.role = r.get_u8();
  if (s.role > 1) throw DecodeError("role must be 0 or 1");
  s.peer = r.get_u32();
  s.n = r.get_u8();
  uint8_t has_pk = r.get_u8();
  if (has_pk > 1) throw DecodeError("bad key flag");
  if (has_pk) s.bank_pk = get_point(r);
  size_t count = r.get_count(kMaxInstances);
  s.instances.resize(count);
  for (auto& inst : s.instances) {
    inst.label = r.get_string();
    if (s.mode == SecurityMode::Malicious && !s.bank_pk) {
      inst.v0 = get_point(r);
      inst.v1 = get_point(r);
    }
  }
  r.expect_done();
  return s;
}

std::optional<PairStart> await_pair_start(Endpoint& ep, std::chrono::milliseconds timeout) {
  Envelope e = ep.recv(PairStart::kControlSession, timeout);
  if (e.type == MsgType::AuctionDone) return std::nullopt;
  if (e.type != MsgType::PairStart)
    throw ProtocolAbort(AbortReason::MalformedMessage, e.session,
                        "expected PairStart, got " + std::string(msg_type_name(e.type)));
  try {
    return PairStart::decode(e.payload);
  } catch (const DecodeError& err) {
    throw ProtocolAbort(AbortReason::MalformedMessage, e.session, err.what());
  }
}

void send_auction_done(Endpoint& ep, uint64_t auction, PartyId client) {
  Envelope e;
  e.type = MsgType::AuctionDone;
  e.session = PairStart::kControlSession;
  e.auction = auction;
  e.recipient = client;
  ep.send(std::move(e));
}

namespace {

void send_start(Endpoint& ep, uint64_t auction, PartyId to, const PairStart& s) {
  Envelope e;
  e.type = MsgType::PairStart;
  e.session = PairStart::kControlSession;
  e.auction = auction;
  e.recipient = to;
  e.payload = s.encode();
  ep.send(std::move(e));
}

// ---------------------------------------------------------------------------
// Malicious pair session: client-side state of one instance.

struct BitSharing {
  std::array<std::vector<Scalar>, 2> x;    // x[h][j]: share h of bit j
  std::array<std::vector<Scalar>, 2> rho;  // commitment randomness of x[h][j]
  std::array<std::vector<Point>, 2> com;   // Com(x[h][j]; rho[h][j])
};

struct CommittedSharesMsg {
  std::array<std::vector<Point>, 2> com;
  std::vector<Scalar> open_x;    // the recipient's share half
  std::vector<Scalar> open_rho;
  std::vector<BitProof<PedersenKey>> bits;
  ComEqProof comeq;
};

Bytes encode_committed_shares(uint32_t k, const CommittedSharesMsg& m, const PedersenKey& key) {
  ByteWriter w;
  w.put_u32(k);
  const size_t n = m.open_x.size();
  for (size_t j = 0; j < n; ++j) {
    put(w, m.com[0][j]);
    put(w, m.com[1][j]);
    put(w, m.open_x[j]);
    put(w, m.open_rho[j]);
    w.put_raw(m.bits[j].encode(key));
  }
  w.put_raw(m.comeq.encode());
  return std::move(w).bytes();
}

CommittedSharesMsg decode_committed_shares(const SessionIo& io, std::span<const uint8_t> bytes, uint32_t k, unsigned n,
                                           const PedersenKey& key) {
  ByteReader r(bytes);
  read_instance(io, r, k);
  CommittedSharesMsg m;
  for (unsigned j = 0; j < n; ++j) {
    m.com[0].push_back(get_point(r));
    m.com[1].push_back(get_point(r));
    m.open_x.push_back(get_scalar(r));
    m.open_rho.push_back(get_scalar(r));
    m.bits.push_back(BitProof<PedersenKey>::decode(key, r.get_raw(BitProof<PedersenKey>::kSize)));
  }
  m.comeq = ComEqProof::decode(r.get_raw(ComEqProof::kSize));
  r.expect_done();
  return m;
}

// Per-list values: [0] for d0 (v0 <= v1), [1] for d1.
template <class V>
using Lists = std::array<std::vector<V>, 2>;

template <class V>
Lists<V> as_lists(ComparisonOutput<V>&& out) {
  return {std::move(out.d0), std::move(out.d1)};
}

struct DSharesMsg {
  Lists<Scalar> d;
  Lists<Scalar> s;
  Lists<Point> other;  // commitments to the counterpart's shares
};

Bytes encode_dshares(uint32_t k, const DSharesMsg& m, bool with_commitments) {
  ByteWriter w;
  w.put_u32(k);
  for (int b = 0; b < 2; ++b) put_scalars(w, m.d[b]);
  if (with_commitments) {
    for (int b = 0; b < 2; ++b) put_scalars(w, m.s[b]);
    for (int b = 0; b < 2; ++b) put_points(w, m.other[b]);
  }
  return std::move(w).bytes();
}

DSharesMsg decode_dshares(const SessionIo& io, std::span<const uint8_t> bytes, uint32_t k, unsigned n,
                          bool with_commitments) {
  ByteReader r(bytes);
  read_instance(io, r, k);
  DSharesMsg m;
  for (int b = 0; b < 2; ++b) m.d[b] = get_scalars(r, n + 1);
  if (with_commitments) {
    for (int b = 0; b < 2; ++b) m.s[b] = get_scalars(r, n + 1);
    for (int b = 0; b < 2; ++b) m.other[b] = get_points(r, n + 1);
  }
  r.expect_done();
  return m;
}

struct RevealMsg {
  Point fresh;
  ComEqProof proof;
  uint64_t value = 0;
  Scalar randomness;
};

Bytes encode_reveal(uint32_t k, const RevealMsg& m, bool malicious) {
  ByteWriter w;
  w.put_u32(k);
  w.put_u64(m.value);
  if (malicious) {
    put(w, m.fresh);
    w.put_raw(m.proof.encode());
    put(w, m.randomness);
  }
  return std::move(w).bytes();
}

RevealMsg decode_reveal(const SessionIo& io, std::span<const uint8_t> bytes, uint32_t k, bool malicious) {
  ByteReader r(bytes);
  read_instance(io, r, k);
  RevealMsg m;
  m.value = r.get_u64();
  if (malicious) {
    m.fresh = get_point(r);
    m.proof = ComEqProof::decode(r.get_raw(ComEqProof::kSize));
    m.randomness = get_scalar(r);
  }
  r.expect_done();
  return m;
}

// A revealed minimum must be a fresh commitment equal to the party's
// registered one, opened to the claimed value.
bool reveal_valid(const RevealMsg& m, const Point& registered, unsigned n, const Bytes& ctx) {
  const auto& params = PedersenParams::standard();
  if (n < 64 && (m.value >> n) != 0) return false;
  return comeq_verify(params, m.proof, registered, m.fresh, ctx) &&
         pedersen_opens(params, m.fresh, Opening{Scalar::from_u64(m.value), m.randomness});
}

RevealMsg make_reveal(uint64_t session, uint32_t k, uint8_t role, const ClientInput& in, const Point& registered,
                      ChaChaStream& rng, bool corrupt) {
  const auto& params = PedersenParams::standard();
  RevealMsg m;
  m.value = in.value + (corrupt ? 1 : 0);
  m.randomness = Scalar::random(rng);
  m.fresh = params.commit(Scalar::from_u64(m.value), m.randomness);
  // A corrupt reveal claims the registered commitment holds the new value.
  Commitment reg{registered, Opening{Scalar::from_u64(m.value), in.randomness}};
  Commitment fresh{m.fresh, Opening{Scalar::from_u64(m.value), m.randomness}};
  m.proof = comeq_prove(params, reg, fresh, rng, proof_context(session, k, role, "reveal"));
  return m;
}

Bytes encode_verdict(uint32_t k, bool bit, const Bytes& proof) {
  ByteWriter w;
  w.put_u32(k);
  w.put_u8(bit ? 1 : 0);
  if (bit && !proof.empty()) w.put_blob(proof);
  return std::move(w).bytes();
}

// Bits of `value` as scalars, with the NonBit deviation applied if asked:
// bit j-1 = 1 becomes 0 and bit j grows by 2, which keeps the weighted sum.
std::vector<Scalar> input_bits(uint64_t value, unsigned n, bool non_bit) {
  auto bits = bits_as_scalars(bit_decompose(value, n));
  if (!non_bit) return bits;
  const Scalar one = Scalar::from_u64(1);
  for (size_t j = 1; j < bits.size(); ++j) {
    if (bits[j - 1] == one) {
      bits[j - 1] = Scalar();
      bits[j] += Scalar::from_u64(2);
      return bits;
    }
  }
  throw UsageError("non-bit deviation needs a value with a set bit above the lowest position");
}

}  // namespace

// ---------------------------------------------------------------------------
// Server side of a pair session.

std::vector<ServerOutcome> pair_session_server(Endpoint& ep, uint64_t session, uint64_t auction, PartyId client0,
                                               PartyId client1, SecurityMode mode,
                                               const std::vector<InstanceSpec>& instances, const ProtocolConfig& cfg,
                                               ChaChaStream& rng, const ServerTamper& tamper) {
  const std::array<PartyId, 2> clients{client0, client1};
  const unsigned n = cfg.n;
  const bool malicious = mode == SecurityMode::Malicious;
  const auto& params = PedersenParams::standard();
  SessionIo io(ep, session, auction, cfg.timeout);

  // The responder hears first so that it is listening before the initiator
  // starts the handshake.
  for (int role : {1, 0}) {
    PairStart s;
    s.session = session;
    s.mode = mode;
    s.role = static_cast<uint8_t>(role);
    s.peer = clients[1 - role];
    s.n = n;
    s.instances = instances;
    if (tamper.swap_commitments && role == 0)
      for (auto& inst : s.instances) inst.v0 = inst.v1;
    send_start(ep, auction, clients[role], s);
  }

  return guarded(io, {client0, client1}, [&] {
    const size_t K = instances.size();
    std::array<std::vector<DSharesMsg>, 2> msgs;
    for (int i = 0; i < 2; ++i)
      for (size_t k = 0; k < K; ++k)
        msgs[i].push_back(decode_dshares(io, io.recv(clients[i], malicious ? MsgType::DSharesMalicious : MsgType::DShares),
                                         static_cast<uint32_t>(k), n, malicious));

    std::vector<ServerOutcome> out(K);
    for (size_t k = 0; k < K; ++k) {
      const auto kk = static_cast<uint32_t>(k);
      Lists<Scalar> d, s;
      Lists<Point> dcom;
      for (int b = 0; b < 2; ++b) {
        for (size_t j = 0; j <= n; ++j) {
          d[b].push_back(msgs[0][k].d[b][j] + msgs[1][k].d[b][j]);
          if (!malicious) continue;
          for (int i = 0; i < 2; ++i) {
            Point c = params.commit(msgs[i][k].d[b][j], msgs[i][k].s[b][j]);
            if (c != msgs[1 - i][k].other[b][j])
              fail(io, AbortReason::ServerRecommitMismatch,
                   "instance " + std::to_string(k) + ": shares of party " + std::to_string(clients[i]) +
                       " do not match the commitment run");
          }
          s[b].push_back(msgs[0][k].s[b][j] + msgs[1][k].s[b][j]);
          dcom[b].push_back(params.commit(msgs[0][k].d[b][j], msgs[0][k].s[b][j]) + msgs[0][k].other[b][j]);
        }
      }
      auto [b0, b1] = comparison_final(d[0], d[1]);
      if (!b0 && !b1) fail(io, AbortReason::BothBitsFalse, "instance " + std::to_string(k));
      out[k].b0 = b0;
      out[k].b1 = b1;

      const std::array<bool, 2> bits{b0, b1};
      for (int i = 0; i < 2; ++i) {
        Bytes proof;
        bool claim = bits[i];
        if (malicious) {
          Bytes ctx = proof_context(session, kk, static_cast<uint8_t>(i), "onemany");
          auto list = pad_pow2(dcom[i]);
          if (bits[i]) {
            size_t l = 0;
            while (!d[i][l].is_zero()) ++l;
            proof = onemany_prove(PedersenKey{}, std::span<const Point>(list), l, s[i][l], rng, ctx).encode({});
          } else if (tamper.forge_onemany) {
            claim = true;
            proof = unchecked::onemany_prove(PedersenKey{}, std::span<const Point>(list), 0, s[i][0], rng, ctx)
                        .encode({});
          }
        }
        io.send(clients[i], MsgType::Verdict, encode_verdict(kk, claim, proof));
      }
    }

    // Every party whose bit is true opens its value to the server; it is
    // passed on only to a party that lost.
    for (size_t k = 0; k < K; ++k) {
      const auto kk = static_cast<uint32_t>(k);
      const std::array<bool, 2> bits{out[k].b0, out[k].b1};
      std::array<std::optional<uint64_t>, 2> revealed;
      for (int i = 0; i < 2; ++i) {
        if (!bits[i]) continue;
        Bytes raw = io.recv(clients[i], MsgType::Reveal);
        RevealMsg m = decode_reveal(io, raw, kk, malicious);
        const Point& reg = i == 0 ? instances[k].v0 : instances[k].v1;
        if (malicious && !reveal_valid(m, reg, n, proof_context(session, kk, static_cast<uint8_t>(i), "reveal")))
          fail(io, AbortReason::RevealInvalid, "instance " + std::to_string(k) + " party " + std::to_string(clients[i]));
        revealed[i] = m.value;
        if (!bits[1 - i]) io.send(clients[1 - i], MsgType::MinNotice, std::move(raw));
      }
      if (revealed[0] && revealed[1] && *revealed[0] != *revealed[1])
        fail(io, AbortReason::RevealInvalid, "tied parties revealed different values");
      out[k].minimum = revealed[0] ? *revealed[0] : *revealed[1];
    }
    // Clients wait for this, so an abort the server raised anywhere above
    // reaches both of them.
    for (PartyId c : clients) {
      ByteWriter w;
      w.put_u32(static_cast<uint32_t>(K));
      io.send(c, MsgType::SessionDone, std::move(w).bytes());
    }
    return out;
  });
}

// ---------------------------------------------------------------------------
// Client side of a pair session.

std::vector<ClientOutcome> pair_session_client(Endpoint& ep, uint64_t auction, const PairStart& start,
                                               const std::vector<ClientInput>& inputs, const ProtocolConfig& cfg,
                                               ChaChaStream& rng, const ClientTamper& tamper) {
  using Kind = ClientTamper::Kind;
  const uint64_t session = start.session;
  const int me = start.role;
  const int other = 1 - me;
  const unsigned n = start.n;
  const bool malicious = start.mode == SecurityMode::Malicious;
  const size_t K = start.instances.size();
  const auto& params = PedersenParams::standard();
  const PedersenKey key;
  SessionIo io(ep, session, auction, cfg.timeout);
  auto tampered = [&](Kind kind, size_t k) { return tamper.kind == kind && tamper.instance == k; };

  return guarded(io, {kServerId}, [&] {
    check_width(io, n);
    if (inputs.size() != K) throw UsageError("input count does not match the session");
    auto registered = [&](size_t k, int role) -> const Point& {
      return role == 0 ? start.instances[k].v0 : start.instances[k].v1;
    };
    if (malicious)
      for (size_t k = 0; k < K; ++k)
        if (params.commit(Scalar::from_u64(inputs[k].value), inputs[k].randomness) != registered(k, me))
          fail(io, AbortReason::CommitmentMismatch, "instance " + std::to_string(k) + " (" + start.instances[k].label + ")");

    io.establish_channel(start.peer, me == 0, rng, cfg.psk);
    Seed seed = coin_toss(io, me == 0, rng, tamper.kind == Kind::BadCoinOpen);

    // Split own bits into additive shares; in malicious mode commit to both
    // halves and prove the commitments are consistent.
    std::vector<BitSharing> own(K);
    for (size_t k = 0; k < K; ++k) {
      const auto kk = static_cast<uint32_t>(k);
      uint64_t value = inputs[k].value;
      if (tampered(Kind::ComEqMismatch, k)) value ^= 1;
      auto bits = input_bits(value, n, tampered(Kind::NonBit, k));
      BitSharing& sh = own[k];
      for (unsigned j = 0; j < n; ++j) {
        Scalar x0 = Scalar::random(rng);
        sh.x[0].push_back(x0);
        sh.x[1].push_back(bits[j] - x0);
      }
      if (!malicious) {
        ByteWriter w;
        w.put_u32(kk);
        put_scalars(w, sh.x[other]);
        io.send_sealed(MsgType::ShareExchange, std::move(w).bytes());
        continue;
      }
      CommittedSharesMsg m;
      std::vector<Scalar> sum_rho;
      std::vector<Point> sums;
      for (unsigned j = 0; j < n; ++j) {
        for (int h = 0; h < 2; ++h) {
          sh.rho[h].push_back(Scalar::random(rng));
          sh.com[h].push_back(params.commit(sh.x[h][j], sh.rho[h][j]));
        }
        sum_rho.push_back(sh.rho[0][j] + sh.rho[1][j]);
        sums.push_back(sh.com[0][j] + sh.com[1][j]);
        Commitment c{sums.back(), Opening{bits[j], sum_rho.back()}};
        Bytes ctx = proof_context(session, kk, static_cast<uint8_t>(me), "bit", j);
        bool is_bit = bits[j].is_zero() || bits[j] == Scalar::from_u64(1);
        m.bits.push_back(is_bit ? bitproof_prove(key, c, rng, ctx) : unchecked::bitproof_prove(key, c, rng, ctx));
      }
      m.com = sh.com;
      m.open_x = sh.x[other];
      m.open_rho = sh.rho[other];
      if (tampered(Kind::BadOpening, k)) m.open_x[tamper.slot % n] += Scalar::from_u64(1);
      if (tampered(Kind::StatementSwap, k) && n > 1) std::swap(m.bits[0], m.bits[1]);
      Commitment reg{registered(k, me), Opening{Scalar::from_u64(value), inputs[k].randomness}};
      Commitment w{weighted_sum(sums), Opening{Scalar::from_u64(value), weighted_sum(sum_rho)}};
      m.comeq = comeq_prove(params, reg, w, rng, proof_context(session, kk, static_cast<uint8_t>(me), "comeq"));
      io.send_sealed(MsgType::CommittedShares, encode_committed_shares(kk, m, key));
    }

    std::vector<ClientOutcome> out(K);
    std::vector<Lists<Scalar>> my_d(K), my_s(K);
    std::vector<Lists<Point>> other_com(K);
    for (size_t k = 0; k < K; ++k) {
      const auto kk = static_cast<uint32_t>(k);
      // share[p][j]: this party's share of party p's bit j.
      std::array<std::vector<Scalar>, 2> share, rho;
      std::array<std::vector<Point>, 2> counterpart_com;  // Com of the counterpart's shares, per party
      share[me] = own[k].x[me];
      rho[me] = own[k].rho[me];
      if (!malicious) {
        Bytes raw = io.recv_sealed(MsgType::ShareExchange);
        ByteReader r(raw);
        read_instance(io, r, kk);
        share[other] = get_scalars(r, n);
        r.expect_done();
      } else {
        CommittedSharesMsg m = decode_committed_shares(io, io.recv_sealed(MsgType::CommittedShares), kk, n, key);
        for (unsigned j = 0; j < n; ++j)
          if (!pedersen_opens(params, m.com[me][j], Opening{m.open_x[j], m.open_rho[j]}))
            fail(io, AbortReason::OpeningInvalid, "instance " + std::to_string(k) + " bit " + std::to_string(j));
        std::vector<Point> sums;
        for (unsigned j = 0; j < n; ++j) sums.push_back(m.com[0][j] + m.com[1][j]);
        if (!comeq_verify(params, m.comeq, registered(k, other), weighted_sum(sums),
                          proof_context(session, kk, static_cast<uint8_t>(other), "comeq")))
          fail(io, AbortReason::ComEqInvalid, "instance " + std::to_string(k));
        for (unsigned j = 0; j < n; ++j)
          if (!bitproof_verify(key, m.bits[j], sums[j], proof_context(session, kk, static_cast<uint8_t>(other), "bit", j)))
            fail(io, AbortReason::BitProofInvalid, "instance " + std::to_string(k) + " bit " + std::to_string(j));
        share[other] = m.open_x;
        rho[other] = m.open_rho;
        counterpart_com[me] = own[k].com[other];
        counterpart_com[other] = m.com[other];
      }

      auto rand = derive_randomness(instance_seed(seed, kk, start.instances[k].label), n);
      DSharesMsg msg;
      msg.d = as_lists(comparison_initial(ScalarModule{me == 0}, std::span<const Scalar>(share[0]),
                                          std::span<const Scalar>(share[1]), rand));
      if (malicious) {
        msg.s = as_lists(comparison_initial(ScalarModule{false}, std::span<const Scalar>(rho[0]),
                                            std::span<const Scalar>(rho[1]), rand));
        msg.other = as_lists(comparison_initial(PointModule{other == 0}, std::span<const Point>(counterpart_com[0]),
                                                std::span<const Point>(counterpart_com[1]), rand));
        my_d[k] = msg.d;
        my_s[k] = msg.s;
        other_com[k] = msg.other;
      }
      // Slots 0..n address the d0 list, n+1..2n+1 the d1 list.
      const size_t list = (tamper.slot / (n + 1)) % 2, pos = tamper.slot % (n + 1);
      if (tampered(Kind::ShareFlip, k)) msg.d[list][pos] += Scalar::from_u64(1);
      if (tampered(Kind::RandomnessFlip, k)) msg.s[list][pos] += Scalar::from_u64(1);
      io.send(kServerId, malicious ? MsgType::DSharesMalicious : MsgType::DShares, encode_dshares(kk, msg, malicious));
    }

    for (size_t k = 0; k < K; ++k) {
      const auto kk = static_cast<uint32_t>(k);
      Bytes raw = io.recv(kServerId, MsgType::Verdict);
      ByteReader r(raw);
      read_instance(io, r, kk);
      uint8_t bit = r.get_u8();
      if (bit > 1) fail(io, AbortReason::MalformedMessage, "verdict bit");
      out[k].bit = bit == 1;
      if (out[k].bit && malicious) {
        Bytes proof_bytes = r.get_blob();
        auto proof = OneManyProof<PedersenKey>::decode(key, proof_bytes);
        std::vector<Point> list;
        for (size_t j = 0; j <= n; ++j) list.push_back(params.commit(my_d[k][me][j], my_s[k][me][j]) + other_com[k][me][j]);
        list = pad_pow2(std::move(list));
        if (!onemany_verify(key, proof, std::span<const Point>(list),
                            proof_context(session, kk, static_cast<uint8_t>(me), "onemany")))
          fail(io, AbortReason::OneManyInvalid, "instance " + std::to_string(k));
      }
      r.expect_done();
    }

    for (size_t k = 0; k < K; ++k) {
      if (!out[k].bit) continue;
      const auto kk = static_cast<uint32_t>(k);
      RevealMsg m;
      if (malicious)
        m = make_reveal(session, kk, static_cast<uint8_t>(me), inputs[k], registered(k, me), rng,
                        tampered(Kind::BadReveal, k));
      else
        m.value = inputs[k].value;
      io.send(kServerId, MsgType::Reveal, encode_reveal(kk, m, malicious));
      out[k].minimum = inputs[k].value;
    }
    for (size_t k = 0; k < K; ++k) {
      if (out[k].bit) continue;
      const auto kk = static_cast<uint32_t>(k);
      RevealMsg m = decode_reveal(io, io.recv(kServerId, MsgType::MinNotice), kk, malicious);
      if (malicious &&
          !reveal_valid(m, registered(k, other), n, proof_context(session, kk, static_cast<uint8_t>(other), "reveal")))
        fail(io, AbortReason::RevealInvalid, "instance " + std::to_string(k));
      if (m.value >= inputs[k].value)
        fail(io, AbortReason::RevealInvalid, "revealed minimum is not below the losing value");
      out[k].minimum = m.value;
    }
    Bytes done = io.recv(kServerId, MsgType::SessionDone);
    ByteReader r(done);
    if (r.get_u32() != K) fail(io, AbortReason::MalformedMessage, "session completed with a different instance count");
    r.expect_done();
    return out;
  });
}

// ---------------------------------------------------------------------------
// Bank-to-client.

namespace {

struct B2CStatementMsg {
  Point v0;
  std::vector<Ciphertext> a;
  CrossEqProof cross;
  std::vector<BitProof<ElGamalKey>> bits;
};

Bytes encode_statement(uint32_t k, const B2CStatementMsg& m, const ElGamalKey& key) {
  ByteWriter w;
  w.put_u32(k);
  put(w, m.v0);
  for (const auto& c : m.a) w.put_raw(c.encode());
  w.put_raw(m.cross.encode());
  for (const auto& b : m.bits) w.put_raw(b.encode(key));
  return std::move(w).bytes();
}

B2CStatementMsg decode_statement(const SessionIo& io, std::span<const uint8_t> bytes, uint32_t k, unsigned n,
                                 const ElGamalKey& key) {
  ByteReader r(bytes);
  read_instance(io, r, k);
  B2CStatementMsg m;
  m.v0 = get_point(r);
  for (unsigned j = 0; j < n; ++j) m.a.push_back(key.read(r));
  m.cross = CrossEqProof::decode(key.pk, r.get_raw(CrossEqProof::kSize));
  for (unsigned j = 0; j < n; ++j) m.bits.push_back(BitProof<ElGamalKey>::decode(key, r.get_raw(BitProof<ElGamalKey>::kSize)));
  r.expect_done();
  return m;
}

Ciphertext weighted_sum(std::span<const Ciphertext> items, const Point& pk) {
  Ciphertext acc = elgamal_trivial(pk, Scalar());
  for (const auto& c : items) acc = acc + acc + c;
  return acc;
}

}  // namespace

std::vector<B2COutcome> b2c_bank(Endpoint& ep, uint64_t session, uint64_t auction, PartyId client,
                                 const ElGamalKeypair& keys, const std::vector<std::string>& labels,
                                 const std::vector<B2CBankInput>& inputs, const ProtocolConfig& cfg,
                                 ChaChaStream& rng, const B2CTamper& tamper) {
  if (labels.size() != inputs.size()) throw UsageError("label count does not match input count");
  const unsigned n = cfg.n;
  const size_t K = inputs.size();
  const auto& params = PedersenParams::standard();
  const ElGamalKey key{keys.pk};
  SessionIo io(ep, session, auction, cfg.timeout);

  PairStart s;
  s.session = session;
  s.mode = SecurityMode::Malicious;
  s.role = 1;
  s.peer = kServerId;
  s.n = n;
  s.bank_pk = keys.pk;
  for (const auto& l : labels) s.instances.push_back(InstanceSpec{l, {}, {}});
  send_start(ep, auction, client, s);

  return guarded(io, {client}, [&] {
    for (size_t k = 0; k < K; ++k) {
      const auto kk = static_cast<uint32_t>(k);
      auto bits = input_bits(inputs[k].value, n, tamper.bad_bitproof && k == 0);
      B2CStatementMsg m;
      std::vector<Scalar> enc_rand;
      for (unsigned j = 0; j < n; ++j) {
        enc_rand.push_back(Scalar::random(rng));
        m.a.push_back(elgamal_encrypt(keys.pk, bits[j], enc_rand.back()));
        OpenedCiphertext oc{m.a.back(), Opening{bits[j], enc_rand.back()}};
        Bytes ctx = proof_context(session, kk, 0, "b2c-bit", j);
        bool is_bit = bits[j].is_zero() || bits[j] == Scalar::from_u64(1);
        m.bits.push_back(is_bit ? bitproof_prove(key, oc, rng, ctx) : unchecked::bitproof_prove(key, oc, rng, ctx));
      }
      const Scalar v = Scalar::from_u64(inputs[k].value);
      m.v0 = params.commit(v, inputs[k].randomness);
      Commitment vc{m.v0, Opening{v, inputs[k].randomness}};
      OpenedCiphertext ac{weighted_sum(m.a, keys.pk), Opening{v, weighted_sum(enc_rand)}};
      m.cross = crosseq_prove(params, key, vc, ac, rng, proof_context(session, kk, 0, "b2c-cross"));
      io.send(client, MsgType::B2CStatement, encode_statement(kk, m, key));
    }

    std::vector<B2COutcome> out(K);
    for (size_t k = 0; k < K; ++k) {
      const auto kk = static_cast<uint32_t>(k);
      Bytes raw = io.recv(client, MsgType::B2CReply);
      ByteReader r(raw);
      read_instance(io, r, kk);
      Lists<Ciphertext> d;
      for (int b = 0; b < 2; ++b)
        for (size_t j = 0; j <= n; ++j) d[b].push_back(key.read(r));
      r.expect_done();
      std::array<std::optional<size_t>, 2> zero;
      for (int b = 0; b < 2; ++b)
        for (size_t j = 0; j <= n && !zero[b]; ++j)
          if (elgamal_is_zero(keys.sk, d[b][j])) zero[b] = j;
      if (!zero[0] && !zero[1]) fail(io, AbortReason::BothBitsFalse, "instance " + std::to_string(k));
      out[k].bank_bit = zero[0].has_value();
      out[k].client_bit = zero[1].has_value();
      out[k].winner = out[k].bank_bit ? 0 : 1;
      const int u = out[k].winner;
      auto list = pad_pow2(d[u]);
      size_t l = *zero[u];
      Bytes ctx = proof_context(session, kk, 0, "b2c-onemany");
      OneManyProof<ElGamalKey> proof;
      if (tamper.forge_onemany) {
        // Proves against the other list, where slot l need not be zero.
        auto wrong = pad_pow2(d[1 - u]);
        proof = unchecked::onemany_prove(key, std::span<const Ciphertext>(wrong), l, keys.sk, rng, ctx);
      } else {
        proof = onemany_prove(key, std::span<const Ciphertext>(list), l, keys.sk, rng, ctx);
      }
      ByteWriter w;
      w.put_u32(kk);
      w.put_u8(static_cast<uint8_t>(u));
      w.put_blob(proof.encode(key));
      if (u == 0) {
        w.put_u64(inputs[k].value);
        put(w, inputs[k].randomness);
      }
      io.send(client, MsgType::B2CVerdict, std::move(w).bytes());
    }

    for (size_t k = 0; k < K; ++k) {
      const auto kk = static_cast<uint32_t>(k);
      if (out[k].winner == 1) {
        Bytes raw = io.recv(client, MsgType::B2CClientReveal);
        ByteReader r(raw);
        read_instance(io, r, kk);
        uint64_t v1 = r.get_u64();
        r.expect_done();
        // The client is the strict minimum unless the bank's bit was also set.
        if (v1 > inputs[k].value || (!out[k].bank_bit && v1 == inputs[k].value))
          fail(io, AbortReason::RevealInvalid, "client value inconsistent with comparison");
        out[k].minimum = v1;
      } else {
        out[k].minimum = inputs[k].value;
      }
      ByteWriter w;
      w.put_u32(kk);
      w.put_u64(out[k].minimum);
      io.send(client, MsgType::B2COutcome, std::move(w).bytes());
    }
    return out;
  });
}

std::vector<B2COutcome> b2c_client(Endpoint& ep, uint64_t auction, const PairStart& start,
                                   const std::vector<uint64_t>& values, const ProtocolConfig& cfg, ChaChaStream& rng,
                                   const B2CTamper& tamper) {
  const uint64_t session = start.session;
  const unsigned n = start.n;
  const size_t K = start.instances.size();
  const auto& params = PedersenParams::standard();
  SessionIo io(ep, session, auction, cfg.timeout);

  return guarded(io, {kServerId}, [&] {
    check_width(io, n);
    if (!start.bank_pk) fail(io, AbortReason::MalformedMessage, "bank session without a key");
    if (values.size() != K) throw UsageError("value count does not match the session");
    const ElGamalKey key{*start.bank_pk};
    const CiphertextModule mod{key.pk};

    std::vector<Point> v0(K);
    std::vector<Lists<Ciphertext>> sent(K);
    for (size_t k = 0; k < K; ++k) {
      const auto kk = static_cast<uint32_t>(k);
      auto m = decode_statement(io, io.recv(kServerId, MsgType::B2CStatement), kk, n, key);
      if (!crosseq_verify(params, key, m.cross, m.v0, weighted_sum(m.a, key.pk),
                          proof_context(session, kk, 0, "b2c-cross")))
        fail(io, AbortReason::ComEqInvalid, "instance " + std::to_string(k));
      for (unsigned j = 0; j < n; ++j)
        if (!bitproof_verify(key, m.bits[j], m.a[j], proof_context(session, kk, 0, "b2c-bit", j)))
          fail(io, AbortReason::BitProofInvalid, "instance " + std::to_string(k) + " bit " + std::to_string(j));
      v0[k] = m.v0;

      std::vector<Ciphertext> own;
      for (const auto& s : bits_as_scalars(bit_decompose(values[k], n))) own.push_back(elgamal_trivial(key.pk, s));
      auto rand = derive_randomness(rng.next_seed(), n);
      auto d = as_lists(comparison_initial(mod, std::span<const Ciphertext>(m.a), std::span<const Ciphertext>(own), rand));
      ByteWriter w;
      w.put_u32(kk);
      for (auto& list : d)
        for (auto& c : list) {
          c = c + elgamal_encrypt(key.pk, Scalar(), Scalar::random(rng));
          key.write(w, c);
        }
      sent[k] = std::move(d);
      io.send(kServerId, MsgType::B2CReply, std::move(w).bytes());
    }

    std::vector<B2COutcome> out(K);
    for (size_t k = 0; k < K; ++k) {
      const auto kk = static_cast<uint32_t>(k);
      Bytes raw = io.recv(kServerId, MsgType::B2CVerdict);
      ByteReader r(raw);
      read_instance(io, r, kk);
      uint8_t u = r.get_u8();
      if (u > 1) fail(io, AbortReason::MalformedMessage, "winner index");
      auto proof = OneManyProof<ElGamalKey>::decode(key, r.get_blob());
      auto list = pad_pow2(sent[k][u]);
      if (!onemany_verify(key, proof, std::span<const Ciphertext>(list), proof_context(session, kk, 0, "b2c-onemany")))
        fail(io, AbortReason::OneManyInvalid, "instance " + std::to_string(k));
      out[k].winner = u;
      out[k].bank_bit = u == 0;
      out[k].client_bit = u == 1;
      if (u == 0) {
        uint64_t bank_value = r.get_u64();
        Scalar rand = get_scalar(r);
        if (!pedersen_opens(params, v0[k], Opening{Scalar::from_u64(bank_value), rand}) || bank_value > values[k])
          fail(io, AbortReason::RevealInvalid, "bank opening");
        out[k].minimum = bank_value;
      } else {
        out[k].minimum = values[k];
      }
      r.expect_done();
    }
    for (size_t k = 0; k < K; ++k) {
      if (out[k].winner != 1) continue;
      ByteWriter w;
      w.put_u32(static_cast<uint32_t>(k));
      w.put_u64(tamper.client_overclaims ? (uint64_t{1} << n) - 1 : values[k]);
      io.send(kServerId, MsgType::B2CClientReveal, std::move(w).bytes());
    }
    for (size_t k = 0; k < K; ++k) {
      Bytes raw = io.recv(kServerId, MsgType::B2COutcome);
      ByteReader r(raw);
      read_instance(io, r, static_cast<uint32_t>(k));
      uint64_t m = r.get_u64();
      r.expect_done();
      if (m != out[k].minimum)
        fail(io, AbortReason::MalformedMessage, "outcome disagrees with the verdict");
    }
    return out;
  });
}

}  // namespace primematch
