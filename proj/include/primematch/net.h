#pragma once

// Star-topology transport. Every unit on the wire is a frame
//
//   u32 length | u8 version | u16 type | body        (length covers the rest)
//
// whose body is an envelope header followed by the message payload. The
// server routes envelopes by recipient: those addressed to the server go to
// its own inbox, everything else is forwarded unchanged.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "primematch/abort.h"
#include "primematch/algebra.h"
#include "primematch/bytes.h"

namespace primematch {

inline constexpr uint8_t kWireVersion = 1;
inline constexpr size_t kDefaultMaxFrame = 1u << 20;

enum class MsgType : uint16_t {
  // Control, client <-> server.
  Hello = 1,
  Welcome = 2,
  RegisterOrders = 3,
  RegisterAck = 4,
  PairStart = 5,
  AuctionDone = 6,
  Abort = 7,
  RouteError = 8,
  Fill = 9,
  // Client <-> client, relayed. Handshake messages travel in clear; all
  // later traffic is a Sealed envelope whose plaintext names its inner type.
  Handshake1 = 16,
  Handshake2 = 17,
  Handshake3 = 18,
  Sealed = 19,
  CoinCommit = 32,
  CoinReveal = 33,
  CoinOpen = 34,
  ShareExchange = 35,
  CommittedShares = 36,
  // Comparison traffic, client <-> server.
  DShares = 48,
  DSharesMalicious = 49,
  Verdict = 50,
  Reveal = 51,
  MinNotice = 52,
  SessionDone = 53,
  // Two-party bank-to-client protocol.
  B2CStatement = 64,
  B2CReply = 65,
  B2CVerdict = 66,
  B2CClientReveal = 67,
  B2COutcome = 68,
};

std::string_view msg_type_name(MsgType t);
bool is_known_msg_type(uint16_t t);

struct Frame {
  uint8_t version = kWireVersion;
  uint16_t type = 0;
  Bytes body;

  bool operator==(const Frame&) const = default;
};

Bytes encode_frame(const Frame& f, size_t max_frame = kDefaultMaxFrame);
// Decodes exactly one frame occupying all of `bytes`.
Frame decode_frame(std::span<const uint8_t> bytes, size_t max_frame = kDefaultMaxFrame);

// Accumulates stream bytes and yields complete frames.
class FrameBuffer {
 public:
  explicit FrameBuffer(size_t max_frame = kDefaultMaxFrame) : max_frame_(max_frame) {}
  void append(std::span<const uint8_t> data);
  std::optional<Frame> next();

 private:
  size_t max_frame_;
  Bytes buf_;
};

using PartyId = uint32_t;
inline constexpr PartyId kServerId = 0;

struct Envelope {
  static constexpr uint8_t kSealedFlag = 1;

  MsgType type = MsgType::Hello;
  uint64_t session = 0;
  uint64_t auction = 0;
  PartyId sender = 0;
  PartyId recipient = 0;
  uint64_t seq = 0;
  uint8_t flags = 0;
  Bytes payload;

  // Header fields bound into the AEAD associated data of sealed payloads.
  Bytes header_bytes() const;
  bool operator==(const Envelope&) const = default;
};

Frame envelope_to_frame(const Envelope& e);
Envelope envelope_from_frame(const Frame& f);

// ---------------------------------------------------------------------------

// Multi-producer queue of envelopes with per-session retrieval.
class Mailbox {
 public:
  static constexpr uint64_t kAnySession = ~uint64_t{0};

  void push(Envelope e);
  // Next envelope for `session` (or any), waiting up to `timeout`. Throws
  // TransportError on timeout or once closed and drained.
  Envelope pop(uint64_t session, std::chrono::milliseconds timeout);
  void close();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Envelope> queue_;
  bool closed_ = false;
};

// A party's attachment to the network. Sequence numbers are stamped per
// (session, recipient) on send and checked per (session, sender) on receive.
class Endpoint {
 public:
  explicit Endpoint(PartyId id) : id_(id) {}
  virtual ~Endpoint() = default;

  PartyId id() const { return id_; }

  void send(Envelope e);
  // Throws ProtocolAbort(ReplayDetected) if a sequence number does not
  // strictly increase, ProtocolAbort(Timeout) on timeout.
  Envelope recv(uint64_t session, std::chrono::milliseconds timeout);

  Mailbox& inbox() { return inbox_; }
  virtual void close() { inbox_.close(); }

 protected:
  virtual void transmit(const Envelope& e) = 0;

 private:
  PartyId id_;
  Mailbox inbox_;
  std::mutex seq_mu_;
  std::map<std::pair<uint64_t, PartyId>, uint64_t> next_out_;
  std::map<std::pair<uint64_t, PartyId>, uint64_t> last_in_;
};

// What the relay saw for one envelope. Payload bytes are kept so tests can
// check that client-to-client traffic is opaque.
struct RelayRecord {
  Envelope envelope;
  bool relayed = false;  // false when addressed to the server itself
};

struct RelayMetrics {
  uint64_t envelopes = 0;
  uint64_t relayed = 0;
  uint64_t bytes = 0;
  uint64_t relayed_bytes = 0;
  uint64_t route_errors = 0;
};

// Server-side routing table. Thread-safe.
class Router {
 public:
  using Sink = std::function<void(const Envelope&)>;
  // Sees every envelope before delivery and returns what to deliver instead:
  // empty to drop, modified to tamper, several to replay.
  using Adversary = std::function<std::vector<Envelope>(const Envelope&)>;

  void attach(PartyId id, Sink sink);
  void detach(PartyId id);
  bool attached(PartyId id) const;
  void route(const Envelope& e);

  void set_adversary(Adversary a);
  void set_recording(bool on);
  std::vector<RelayRecord> records() const;
  void clear_records();
  RelayMetrics metrics() const;
  std::string metrics_text() const;

 private:
  void deliver(const Envelope& e);

  mutable std::mutex mu_;
  std::map<PartyId, Sink> sinks_;
  Adversary adversary_;
  bool recording_ = false;
  std::vector<RelayRecord> records_;
  RelayMetrics metrics_;
};

// In-process star network: all endpoints share one router.
class LocalNetwork {
 public:
  LocalNetwork() : router_(std::make_shared<Router>()) {}

  std::shared_ptr<Endpoint> connect(PartyId id);
  Router& router() { return *router_; }

 private:
  std::shared_ptr<Router> router_;
};

// ---------------------------------------------------------------------------
// TCP transport.

class TcpServer {
 public:
  // Binds and listens; port 0 picks a free port.
  TcpServer(const std::string& host, uint16_t port, size_t max_frame = kDefaultMaxFrame);
  ~TcpServer();

  uint16_t port() const { return port_; }
  Router& router() { return *router_; }
  // The server's own endpoint (party kServerId).
  std::shared_ptr<Endpoint> endpoint() { return local_; }
  // Blocks until `count` distinct clients have said Hello or the timeout
  // passes; returns the ids seen so far.
  std::vector<PartyId> wait_for_clients(size_t count, std::chrono::milliseconds timeout);
  std::vector<PartyId> clients() const;
  void stop();

 private:
  struct Conn;
  void accept_loop();
  void serve(std::shared_ptr<Conn> conn);

  int listen_fd_ = -1;
  uint16_t port_ = 0;
  size_t max_frame_;
  std::shared_ptr<Router> router_;
  std::shared_ptr<Endpoint> local_;
  std::thread acceptor_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::shared_ptr<Conn>> conns_;
  std::vector<PartyId> hello_order_;
  bool stopping_ = false;
};

// Connects, sends Hello for `id`, and returns an endpoint whose inbox is fed
// by a background reader.
std::shared_ptr<Endpoint> tcp_connect(const std::string& host, uint16_t port, PartyId id,
                                      std::chrono::milliseconds timeout, size_t max_frame = kDefaultMaxFrame);

// ---------------------------------------------------------------------------
// Client-to-client secure channel: ephemeral ristretto255 Diffie-Hellman,
// BLAKE2b key derivation over the handshake transcript (optionally keyed by
// a pre-shared key), key confirmation in both directions, then
// ChaCha20-Poly1305 (IETF) with a per-direction counter nonce.

class SecureChannel {
 public:
  Bytes seal(std::span<const uint8_t> plaintext, std::span<const uint8_t> ad);
  // Throws ProtocolAbort(ChannelAuthFailed, session) on failure; the channel
  // is unusable afterwards.
  Bytes open(std::span<const uint8_t> ciphertext, std::span<const uint8_t> ad, uint64_t session);
  bool failed() const { return failed_; }

 private:
  friend class Handshake;
  std::array<uint8_t, 32> send_key_{};
  std::array<uint8_t, 32> recv_key_{};
  uint64_t send_ctr_ = 1;
  uint64_t recv_ctr_ = 1;
  bool failed_ = false;
};

// Three-message handshake as pure transitions; the caller moves the bytes.
// Any authentication or decoding failure throws
// ProtocolAbort(HandshakeFailed, session).
class Handshake {
 public:
  Handshake(bool initiator, uint64_t session, ChaChaStream& rng, std::span<const uint8_t> psk = {});

  Bytes hello();                                          // initiator: msg 1
  Bytes respond(std::span<const uint8_t> msg1);           // responder: msg 2
  Bytes finish(std::span<const uint8_t> msg2);            // initiator: msg 3
  void confirm(std::span<const uint8_t> msg3);            // responder
  SecureChannel channel() const;

 private:
  void derive(const Point& peer);

  bool initiator_;
  uint64_t session_;
  Scalar eph_;
  Point eph_pub_;
  Point peer_pub_;
  Bytes psk_;
  std::array<uint8_t, 32> i2r_{};
  std::array<uint8_t, 32> r2i_{};
  bool done_ = false;
};

}  // namespace primematch
