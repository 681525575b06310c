#include <gtest/gtest.h>

#include <thread>

#include "primematch/net.h"

using namespace primematch;
using namespace std::chrono_literals;

namespace {

const std::vector<MsgType> kAllTypes = {
    MsgType::Hello,          MsgType::Welcome,      MsgType::RegisterOrders,  MsgType::RegisterAck,
    MsgType::PairStart,      MsgType::AuctionDone,  MsgType::Abort,           MsgType::RouteError, MsgType::Fill,
    MsgType::Handshake1,     MsgType::Handshake2,   MsgType::Handshake3,      MsgType::Sealed,
    MsgType::CoinCommit,     MsgType::CoinReveal,   MsgType::CoinOpen,        MsgType::ShareExchange,
    MsgType::CommittedShares, MsgType::DShares,     MsgType::DSharesMalicious, MsgType::Verdict,
    MsgType::Reveal,         MsgType::MinNotice, MsgType::SessionDone,    MsgType::B2CStatement,    MsgType::B2CReply,
    MsgType::B2CVerdict,     MsgType::B2CClientReveal, MsgType::B2COutcome,
};

Envelope sample(MsgType t, size_t payload_len, uint8_t fill = 0xab) {
  Envelope e;
  e.type = t;
  e.session = 0x1122334455667788ull;
  e.auction = 42;
  e.sender = 3;
  e.recipient = 4;
  e.seq = 9;
  e.flags = Envelope::kSealedFlag;
  e.payload.assign(payload_len, fill);
  return e;
}

ChaChaStream rng_for(uint8_t tag) {
  Seed s{};
  s[2] = tag;
  return ChaChaStream(s);
}

}  // namespace

TEST(Frame, RoundtripEveryType) {
  for (MsgType t : kAllTypes) {
    Envelope e = sample(t, 17);
    Bytes wire = encode_frame(envelope_to_frame(e));
    Envelope back = envelope_from_frame(decode_frame(wire));
    EXPECT_EQ(back, e) << msg_type_name(t);
  }
}

TEST(Frame, TruncationAndVersionRejected) {
  Bytes wire = encode_frame(envelope_to_frame(sample(MsgType::Verdict, 40)));
  for (size_t cut = 1; cut < wire.size(); ++cut) {
    Bytes shorter(wire.begin(), wire.end() - static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(decode_frame(shorter), DecodeError) << cut;
  }
  Bytes bad_version = wire;
  bad_version[4] = 2;
  EXPECT_THROW(decode_frame(bad_version), DecodeError);
  Bytes bad_type = wire;
  bad_type[5] = 0x7f;
  EXPECT_THROW(envelope_from_frame(decode_frame(bad_type)), DecodeError);
  // Envelope header itself truncated inside a well-formed frame.
  Frame tiny{kWireVersion, static_cast<uint16_t>(MsgType::Verdict), Bytes(10, 0)};
  EXPECT_THROW(envelope_from_frame(tiny), DecodeError);
}

TEST(Frame, OversizeRejected) {
  Frame big{kWireVersion, static_cast<uint16_t>(MsgType::Sealed), Bytes(kDefaultMaxFrame, 0)};
  EXPECT_THROW(encode_frame(big), DecodeError);
  Bytes header{0x00, 0x10, 0x00, 0x00};  // claims 1 MB of body
  FrameBuffer fb;
  fb.append(header);
  EXPECT_THROW(fb.next(), DecodeError);
}

TEST(FrameBuffer, ReassemblesArbitrarySplits) {
  auto rng = rng_for(1);
  Bytes stream;
  std::vector<Envelope> sent;
  for (int i = 0; i < 50; ++i) {
    Envelope e = sample(kAllTypes[i % kAllTypes.size()], rng.uniform_below(300), static_cast<uint8_t>(i));
    sent.push_back(e);
    Bytes w = encode_frame(envelope_to_frame(e));
    stream.insert(stream.end(), w.begin(), w.end());
  }
  FrameBuffer fb;
  std::vector<Envelope> got;
  size_t pos = 0;
  while (pos < stream.size()) {
    size_t take = std::min<size_t>(1 + rng.uniform_below(97), stream.size() - pos);
    fb.append(std::span<const uint8_t>(stream.data() + pos, take));
    pos += take;
    while (auto f = fb.next()) got.push_back(envelope_from_frame(*f));
  }
  EXPECT_EQ(got, sent);
}

TEST(LocalRelay, DeliversByteIdentical) {
  LocalNetwork net;
  auto a = net.connect(1), b = net.connect(2);
  auto rng = rng_for(2);
  for (int i = 0; i < 10000; ++i) {
    Envelope e;
    e.type = MsgType::Sealed;
    e.session = 7;
    e.recipient = 2;
    e.payload.resize(rng.uniform_below(64));
    rng.fill(e.payload);
    a->send(e);
    Envelope got = b->recv(7, 1000ms);
    ASSERT_EQ(got.payload, e.payload);
    ASSERT_EQ(got.sender, 1u);
  }
  EXPECT_EQ(net.router().metrics().relayed, 10000u);
}

TEST(LocalRelay, UnknownRecipientBouncesToSender) {
  LocalNetwork net;
  auto a = net.connect(1);
  {
    auto b = net.connect(2);
  }
  Envelope e;
  e.type = MsgType::Sealed;
  e.session = 5;
  e.recipient = 2;
  a->send(e);
  try {
    a->recv(5, 1000ms);
    FAIL() << "expected abort";
  } catch (const ProtocolAbort& ab) {
    EXPECT_EQ(ab.reason(), AbortReason::RouteError);
  }
}

TEST(LocalRelay, ReplayedEnvelopeDetected) {
  LocalNetwork net;
  auto a = net.connect(1), b = net.connect(2);
  std::vector<Envelope> seen;
  net.router().set_adversary([&](const Envelope& e) {
    seen.push_back(e);
    std::vector<Envelope> out{e};
    if (seen.size() == 2) out.push_back(seen[0]);
    return out;
  });
  for (int i = 0; i < 2; ++i) {
    Envelope e;
    e.type = MsgType::Sealed;
    e.session = 1;
    e.recipient = 2;
    a->send(e);
  }
  EXPECT_NO_THROW(b->recv(1, 1000ms));
  EXPECT_NO_THROW(b->recv(1, 1000ms));
  try {
    b->recv(1, 1000ms);
    FAIL() << "expected abort";
  } catch (const ProtocolAbort& ab) {
    EXPECT_EQ(ab.reason(), AbortReason::ReplayDetected);
  }
}

TEST(LocalRelay, TimeoutIsAnAbortNotAHang) {
  LocalNetwork net;
  auto a = net.connect(1);
  auto start = std::chrono::steady_clock::now();
  try {
    a->recv(1, 100ms);
    FAIL();
  } catch (const ProtocolAbort& ab) {
    EXPECT_EQ(ab.reason(), AbortReason::Timeout);
  }
  EXPECT_LT(std::chrono::steady_clock::now() - start, 2s);
}

TEST(LocalRelay, SessionsAreDemultiplexed) {
  LocalNetwork net;
  auto a = net.connect(1), b = net.connect(2);
  for (uint64_t s : {10u, 20u, 10u}) {
    Envelope e;
    e.type = MsgType::Sealed;
    e.session = s;
    e.recipient = 2;
    e.payload = {static_cast<uint8_t>(s)};
    a->send(e);
  }
  EXPECT_EQ(b->recv(20, 100ms).payload[0], 20);
  EXPECT_EQ(b->recv(10, 100ms).payload[0], 10);
  EXPECT_EQ(b->recv(10, 100ms).payload[0], 10);
}

namespace {

struct ChannelPair {
  SecureChannel init;
  SecureChannel resp;
};

// Tamper callback may change each handshake message in flight.
ChannelPair run_handshake(std::function<void(int, Bytes&)> tamper = {}, Bytes psk_i = {}, Bytes psk_r = {}) {
  auto ri = rng_for(10), rr = rng_for(11);
  Handshake hi(true, 77, ri, psk_i), hr(false, 77, rr, psk_r);
  Bytes m1 = hi.hello();
  if (tamper) tamper(1, m1);
  Bytes m2 = hr.respond(m1);
  if (tamper) tamper(2, m2);
  Bytes m3 = hi.finish(m2);
  if (tamper) tamper(3, m3);
  hr.confirm(m3);
  return {hi.channel(), hr.channel()};
}

}  // namespace

TEST(SecureChannel, HonestRoundtrip) {
  auto [ci, cr] = run_handshake();
  Bytes ad{1, 2};
  for (int i = 0; i < 5; ++i) {
    Bytes msg(10 + i, static_cast<uint8_t>(i));
    Bytes ct = ci.seal(msg, ad);
    EXPECT_EQ(cr.open(ct, ad, 77), msg);
    Bytes back = cr.seal(msg, ad);
    EXPECT_EQ(ci.open(back, ad, 77), msg);
  }
}

TEST(SecureChannel, EveryHandshakeByteFlipFails) {
  for (int which = 1; which <= 3; ++which) {
    const size_t len = which == 1 ? 32 : which == 2 ? 48 : 16;
    for (size_t pos = 0; pos < len; ++pos) {
      try {
        run_handshake([&](int m, Bytes& b) {
          if (m == which) b[pos] ^= 0x01;
        });
        FAIL() << "message " << which << " byte " << pos;
      } catch (const ProtocolAbort& ab) {
        EXPECT_EQ(ab.reason(), AbortReason::HandshakeFailed);
      }
    }
  }
}

TEST(SecureChannel, PskMismatchFails) {
  Bytes k1(32, 1), k2(32, 2);
  EXPECT_NO_THROW(run_handshake({}, k1, k1));
  EXPECT_THROW(run_handshake({}, k1, k2), ProtocolAbort);
  EXPECT_THROW(run_handshake({}, k1, {}), ProtocolAbort);
}

TEST(SecureChannel, TamperedCiphertextTerminatesChannel) {
  auto [ci, cr] = run_handshake();
  Bytes ct = ci.seal(Bytes{1, 2, 3}, {});
  ct[0] ^= 1;
  try {
    cr.open(ct, {}, 77);
    FAIL();
  } catch (const ProtocolAbort& ab) {
    EXPECT_EQ(ab.reason(), AbortReason::ChannelAuthFailed);
  }
  EXPECT_TRUE(cr.failed());
  Bytes ok = ci.seal(Bytes{4}, {});
  EXPECT_THROW(cr.open(ok, {}, 77), ProtocolAbort);
}

TEST(SecureChannel, WrongAssociatedDataFails) {
  auto [ci, cr] = run_handshake();
  Bytes ct = ci.seal(Bytes{1, 2, 3}, Bytes{1});
  EXPECT_THROW(cr.open(ct, Bytes{2}, 77), ProtocolAbort);
}

TEST(Tcp, RelayAndServerInbox) {
  TcpServer server("127.0.0.1", 0);
  auto a = tcp_connect("127.0.0.1", server.port(), 1, 2000ms);
  auto b = tcp_connect("127.0.0.1", server.port(), 2, 2000ms);
  auto ids = server.wait_for_clients(2, 2000ms);
  ASSERT_EQ(ids.size(), 2u);

  Envelope e;
  e.type = MsgType::Sealed;
  e.session = 3;
  e.recipient = 2;
  e.payload = {9, 8, 7};
  a->send(e);
  EXPECT_EQ(b->recv(3, 2000ms).payload, e.payload);

  Envelope up;
  up.type = MsgType::DShares;
  up.session = 3;
  up.recipient = kServerId;
  up.payload = {1};
  b->send(up);
  Envelope got = server.endpoint()->recv(3, 2000ms);
  EXPECT_EQ(got.sender, 2u);
  EXPECT_EQ(got.type, MsgType::DShares);

  Envelope down;
  down.type = MsgType::Verdict;
  down.session = 3;
  down.recipient = 1;
  server.endpoint()->send(down);
  EXPECT_EQ(a->recv(3, 2000ms).type, MsgType::Verdict);
}

TEST(Tcp, DroppedConnectionSurfacesAsAbort) {
  TcpServer server("127.0.0.1", 0);
  auto a = tcp_connect("127.0.0.1", server.port(), 1, 2000ms);
  server.wait_for_clients(1, 2000ms);
  server.stop();
  auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(a->recv(1, 1500ms), ProtocolAbort);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 3s);
}

TEST(Metrics, PlainTextCounters) {
  LocalNetwork net;
  auto a = net.connect(1), b = net.connect(2);
  Envelope e;
  e.type = MsgType::Sealed;
  e.recipient = 2;
  e.payload = {1, 2, 3};
  a->send(e);
  std::string text = net.router().metrics_text();
  EXPECT_NE(text.find("primematch_relayed_total 1"), std::string::npos);
  EXPECT_NE(text.find("primematch_relayed_bytes_total 3"), std::string::npos);
}
