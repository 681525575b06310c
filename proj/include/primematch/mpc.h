#pragma once

// Protocol state machines. Each function runs one party of one pair session
// to completion on the calling thread, blocking on its endpoint. A session
// batches any number of comparison instances (one per symbol and side) that
// share one secure channel and one coin toss.
//
// On any failed check the detecting party sends an Abort envelope (to the
// server, or from the server to both clients) and throws ProtocolAbort; the
// other parties rethrow the same reason when the notice reaches them.

#include <chrono>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "primematch/abort.h"
#include "primematch/algebra.h"
#include "primematch/compare.h"
#include "primematch/net.h"
#include "primematch/rng.h"
#include "primematch/zkp.h"

namespace primematch {

enum class SecurityMode : uint8_t { SemiHonest = 0, Malicious = 1 };

std::string_view security_mode_name(SecurityMode m);
SecurityMode security_mode_from_name(std::string_view name);

struct ProtocolConfig {
  unsigned n = 31;
  std::chrono::milliseconds timeout{30000};
  Bytes psk;  // optional pre-shared key for the client-to-client channel
};

// Session-scoped messaging on top of an endpoint.
class SessionIo {
 public:
  SessionIo(Endpoint& ep, uint64_t session, uint64_t auction, std::chrono::milliseconds timeout);

  uint64_t session() const { return session_; }
  PartyId self() const { return ep_.id(); }

  void send(PartyId to, MsgType type, Bytes payload);
  // Next message of `type` from `from`. Messages from other senders are held
  // for later calls; an Abort from anyone ends the session.
  Bytes recv(PartyId from, MsgType type);

  void establish_channel(PartyId peer, bool initiator, ChaChaStream& rng, std::span<const uint8_t> psk);
  void send_sealed(MsgType inner, const Bytes& payload);
  Bytes recv_sealed(MsgType inner);

  // Tells every party in `to` that this session is over, skipping the party
  // that reported the abort to us.
  void notify_abort(const ProtocolAbort& a, std::span<const PartyId> to);

 private:
  Envelope next_from(PartyId from);
  [[noreturn]] void raise_remote(const Envelope& e);

  Endpoint& ep_;
  uint64_t session_;
  uint64_t auction_;
  std::chrono::milliseconds timeout_;
  std::deque<Envelope> pending_;
  std::optional<SecureChannel> channel_;
  PartyId peer_ = 0;
  std::optional<PartyId> abort_reporter_;
};

// Commit-then-reveal coin toss over an established channel. The initiator
// commits to s0, the responder answers with s1, the initiator opens; the
// seed is s0 xor s1.
Seed coin_toss(SessionIo& io, bool initiator, ChaChaStream& rng, bool corrupt_opening = false);

// Randomness of instance `index` with label `label` in a session.
Seed instance_seed(const Seed& session_seed, uint32_t index, std::string_view label);

// ---------------------------------------------------------------------------
// Pair sessions (three parties).

struct InstanceSpec {
  std::string label;  // e.g. "AAPL/buy"; both clients map it to their own input
  Point v0;           // registered commitments (malicious mode only)
  Point v1;
};

// Announces a session to one client. It travels on the control session
// (session 0) so that a client can wait for it while peers already send
// traffic in the new session.
struct PairStart {
  static constexpr uint64_t kControlSession = 0;

  uint64_t session = 0;
  SecurityMode mode = SecurityMode::Malicious;
  uint8_t role = 0;  // 0 or 1; the client of a bank session is role 1
  PartyId peer = 0;  // kServerId for a bank session
  unsigned n = 31;
  std::optional<Point> bank_pk;  // set for bank sessions
  std::vector<InstanceSpec> instances;

  bool is_bank_session() const { return bank_pk.has_value(); }

  Bytes encode() const;
  static PairStart decode(std::span<const uint8_t> bytes);
};

// A client's input to one instance: its value and, in malicious mode, the
// randomness of its registered commitment.
struct ClientInput {
  uint64_t value = 0;
  Scalar randomness;
};

struct ClientOutcome {
  bool bit = false;  // own comparison bit: (own value <= other value)
  uint64_t minimum = 0;
};

struct ServerOutcome {
  bool b0 = false;
  bool b1 = false;
  uint64_t minimum = 0;
};

// Deviations a corrupted client can be told to perform.
struct ClientTamper {
  enum class Kind {
    None,
    ShareFlip,         // adds 1 to one d-share sent to the server
    RandomnessFlip,    // adds 1 to one commitment-randomness share
    NonBit,            // commits a "bit" equal to 2 (compensated so sums still match)
    ComEqMismatch,     // shares a value different from the registered one
    StatementSwap,     // sends bit proofs in the wrong order
    BadOpening,        // opens the peer's share half to a wrong value
    BadCoinOpen,       // opens the coin-toss commitment to a different s0
    BadReveal,         // reveals a minimum that differs from its commitment
  };
  Kind kind = Kind::None;
  size_t instance = 0;
  size_t slot = 0;  // which bit, or which d-slot (0..n list d0, n+1..2n+1 list d1)
};

struct ServerTamper {
  bool forge_onemany = false;       // claims true to a losing client with a forged proof
  bool swap_commitments = false;    // sends a client a commitment that is not its own
};

std::string_view tamper_kind_name(ClientTamper::Kind k);

// Server side: announces the pair to both clients and runs all instances.
std::vector<ServerOutcome> pair_session_server(Endpoint& ep, uint64_t session, uint64_t auction, PartyId client0,
                                               PartyId client1, SecurityMode mode,
                                               const std::vector<InstanceSpec>& instances, const ProtocolConfig& cfg,
                                               ChaChaStream& rng, const ServerTamper& tamper = {});

// Client side, after `start` was received. `inputs` is indexed like
// start.instances.
std::vector<ClientOutcome> pair_session_client(Endpoint& ep, uint64_t auction, const PairStart& start,
                                               const std::vector<ClientInput>& inputs, const ProtocolConfig& cfg,
                                               ChaChaStream& rng, const ClientTamper& tamper = {});

// Next control message for a client: a PairStart, or nullopt once the server
// announces AuctionDone.
std::optional<PairStart> await_pair_start(Endpoint& ep, std::chrono::milliseconds timeout);
void send_auction_done(Endpoint& ep, uint64_t auction, PartyId client);

// ---------------------------------------------------------------------------
// Two-party bank-to-client minimum. The bank is the server party.

struct B2CBankInput {
  uint64_t value = 0;
  Scalar randomness;  // opening of the bank's commitment V0
};

struct B2COutcome {
  bool bank_bit = false;    // v0 <= v1
  bool client_bit = false;  // v1 <= v0
  uint8_t winner = 0;       // u: 0 if the bank holds the minimum (ties included)
  uint64_t minimum = 0;
};

struct B2CTamper {
  bool bad_bitproof = false;      // bank encrypts a non-bit
  bool forge_onemany = false;     // bank proves for the wrong list
  bool client_overclaims = false; // client reveals a value larger than the bank's
};

std::vector<B2COutcome> b2c_bank(Endpoint& ep, uint64_t session, uint64_t auction, PartyId client,
                                 const ElGamalKeypair& keys, const std::vector<std::string>& labels,
                                 const std::vector<B2CBankInput>& inputs, const ProtocolConfig& cfg,
                                 ChaChaStream& rng, const B2CTamper& tamper = {});

// `values` is indexed like start.instances.
std::vector<B2COutcome> b2c_client(Endpoint& ep, uint64_t auction, const PairStart& start,
                                   const std::vector<uint64_t>& values, const ProtocolConfig& cfg, ChaChaStream& rng,
                                   const B2CTamper& tamper = {});

}  // namespace primematch
