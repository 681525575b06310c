#pragma once

// Auction layer: order books, the matching functionalities, and the
// orchestration that drives them either through the distributed protocols or
// by plain evaluation.
//
// The orchestrator is written from the server's point of view: it never sees
// client amounts. It asks a Backend to run comparison sessions (identified by
// instance labels that tell each client which of its amounts to contribute)
// and then tells the Backend which fills to execute.

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "primematch/mpc.h"

namespace primematch {

enum class Side : uint8_t { Buy = 0, Sell = 1 };

std::string_view side_name(Side s);
Side side_from_name(std::string_view name);
inline Side opposite(Side s) { return s == Side::Buy ? Side::Sell : Side::Buy; }

struct Order {
  std::string symbol;
  Side side = Side::Buy;
  uint64_t min_amount = 0;
  uint64_t max_amount = 0;

  bool operator==(const Order&) const = default;
};

struct OrderKey {
  std::string symbol;
  Side side = Side::Buy;

  auto operator<=>(const OrderKey&) const = default;
};

class SymbolUniverse {
 public:
  SymbolUniverse() = default;
  explicit SymbolUniverse(std::vector<std::string> symbols);

  const std::vector<std::string>& symbols() const { return symbols_; }
  bool contains(std::string_view s) const;
  size_t size() const { return symbols_.size(); }

  // One symbol per line; blank lines and '#' comments ignored.
  static SymbolUniverse parse(std::istream& in);

 private:
  std::vector<std::string> symbols_;
};

// CSV rows `symbol,side,min_qty,max_qty` (a header row naming those columns
// is allowed). Errors name the 1-based row. `n` bounds amounts below 2^n.
// A client places one order per symbol; `bank` allows one per side instead.
std::vector<Order> parse_orders_csv(std::istream& in, const SymbolUniverse& u, unsigned n, bool bank = false);
std::vector<Order> load_orders_csv(const std::string& path, const SymbolUniverse& u, unsigned n, bool bank = false);
// Checks the rules CSV ingestion applies, for orders built in code. Without
// `ranged`, min and max must agree.
void validate_orders(const std::vector<Order>& orders, const SymbolUniverse& u, unsigned n, bool ranged = true);
// The bank may hold both sides of a symbol, once each, with a single amount.
void validate_bank_orders(const std::vector<Order>& orders, const SymbolUniverse& u, unsigned n);

enum class Functionality : uint8_t {
  BankToClient = 0,    // bank (the server) against each client
  ClientToClient = 1,  // exactly two clients
  MultiClient = 2,     // every pair of clients in random order
  Queue = 3,           // per-symbol FIFO queues
  RangeBankToClient = 4,
  RangeClientToClient = 5,
};

std::string_view functionality_name(Functionality f);
Functionality functionality_from_name(std::string_view name);
bool is_range(Functionality f);
bool is_bank(Functionality f);

enum class PassTag : uint8_t { Plain = 0, MinPass = 1, MaxPass = 2 };
std::string_view pass_name(PassTag p);

struct MatchRecord {
  std::string symbol;
  PartyId buyer = 0;
  PartyId seller = 0;
  uint64_t quantity = 0;
  PassTag pass = PassTag::Plain;
  uint64_t session = 0;

  bool operator==(const MatchRecord&) const = default;
};

struct AbortRecord {
  uint64_t session = 0;
  std::vector<PartyId> parties;
  AbortReason reason = AbortReason::None;

  bool operator==(const AbortRecord&) const = default;
};

struct AuctionParams {
  Functionality functionality = Functionality::MultiClient;
  SecurityMode mode = SecurityMode::Malicious;
  unsigned n = 31;
  SymbolUniverse universe;
  Seed seed{};
  uint64_t auction = 1;
};

// Rejects combinations the engine cannot run (see README).
void validate_params(const AuctionParams& p);

// A match log: events in logical-time order. Logical time t is the event's
// position, so logs compare byte for byte across transports.
struct MatchLog {
  struct Event {
    std::optional<MatchRecord> match;
    std::optional<AbortRecord> abort;
  };

  AuctionParams params;
  std::vector<PartyId> clients;
  std::vector<Event> events;

  std::vector<MatchRecord> matches() const;
  std::vector<AbortRecord> aborts() const;
  std::string to_jsonl() const;
};

// ---------------------------------------------------------------------------
// Instance labels.

enum class Field : uint8_t { Min = 0, Max = 1 };

// Which amounts the two sides of one comparison contribute. For a pair
// session `side` is role 0's side and role 1 holds the opposite side; for a
// bank session `side` is the client's side, `own` its field, and the bank
// contributes its residual on the opposite side.
struct InstanceLabel {
  std::string symbol;
  Side side = Side::Buy;
  Field own = Field::Min;   // role 0 (pair) or the client (bank)
  Field other = Field::Min; // role 1 (pair only)

  std::string encode_pair() const;
  std::string encode_bank() const;
  static InstanceLabel parse_pair(std::string_view s);
  static InstanceLabel parse_bank(std::string_view s);
};

// ---------------------------------------------------------------------------
// Client state.

struct Fill {
  std::string symbol;
  Side side = Side::Buy;  // the receiving client's side
  uint64_t quantity = 0;
  PartyId counterparty = 0;
  PassTag pass = PassTag::Plain;

  bool operator==(const Fill&) const = default;
};

// Residual amounts of one client over the whole universe (absent orders are
// zero), with the randomness of the registered commitments. A fill of q
// lowers max by q and min by min(q, min).
class ClientBook {
 public:
  struct Entry {
    uint64_t min = 0;
    uint64_t max = 0;
    Scalar r_min;
    Scalar r_max;
    bool present = false;
  };

  ClientBook(PartyId id, const SymbolUniverse& u, const std::vector<Order>& orders, ChaChaStream& rng);

  PartyId id() const { return id_; }
  const Entry& entry(const OrderKey& k) const;
  uint64_t value(const OrderKey& k, Field f) const;
  const Scalar& randomness(const OrderKey& k, Field f) const;
  Point commitment(const OrderKey& k, Field f) const;
  // Keys of orders the client actually placed, in CSV order.
  const std::vector<OrderKey>& placed() const { return placed_; }

  // Throws UsageError if q exceeds the residual maximum.
  void apply(const Fill& f);
  uint64_t filled(const OrderKey& k) const;

 private:
  PartyId id_;
  std::map<OrderKey, Entry> entries_;
  std::map<OrderKey, uint64_t> filled_;
  std::vector<OrderKey> placed_;
};

// Plaintext book of the bank, one amount per (symbol, side).
class BankBook {
 public:
  BankBook() = default;
  BankBook(const SymbolUniverse& u, const std::vector<Order>& orders);

  uint64_t residual(const OrderKey& k) const;
  void take(const OrderKey& k, uint64_t q);

 private:
  std::map<OrderKey, uint64_t> amounts_;
};

// ---------------------------------------------------------------------------
// Backends.

struct InstanceResult {
  bool b0 = false;  // role 0 (or the bank) holds the minimum
  bool b1 = false;
  uint64_t minimum = 0;
};

struct SessionResult {
  std::vector<InstanceResult> results;
  std::optional<AbortReason> abort;
  std::string detail;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual SessionResult pair(uint64_t session, PartyId a, PartyId b, const std::vector<InstanceLabel>& labels) = 0;
  virtual SessionResult bank(uint64_t session, PartyId client, const std::vector<InstanceLabel>& labels,
                             const std::vector<uint64_t>& bank_values) = 0;
  virtual void fill(uint64_t session, PartyId client, const std::vector<Fill>& fills) = 0;
};

// Evaluates every comparison in the clear from the clients' books.
class PlainBackend : public Backend {
 public:
  explicit PlainBackend(std::vector<ClientBook> books);

  SessionResult pair(uint64_t session, PartyId a, PartyId b, const std::vector<InstanceLabel>& labels) override;
  SessionResult bank(uint64_t session, PartyId client, const std::vector<InstanceLabel>& labels,
                     const std::vector<uint64_t>& bank_values) override;
  void fill(uint64_t session, PartyId client, const std::vector<Fill>& fills) override;

  const ClientBook& book(PartyId id) const;

 private:
  ClientBook& mut(PartyId id);
  std::vector<ClientBook> books_;
};

// What the server holds for one registered client.
struct Registration {
  PartyId client = 0;
  std::vector<OrderKey> placed;  // in registration order (queue mode)
  std::map<OrderKey, Point> commitments;  // to the amount; malicious non-range modes
};

// Server side of the distributed protocols. Keeps the registered commitments
// and lowers them homomorphically as fills execute.
class NetworkBackend : public Backend {
 public:
  NetworkBackend(Endpoint& ep, const AuctionParams& params, const ProtocolConfig& cfg, ChaChaStream& rng,
                 std::map<PartyId, Registration> registry);

  SessionResult pair(uint64_t session, PartyId a, PartyId b, const std::vector<InstanceLabel>& labels) override;
  SessionResult bank(uint64_t session, PartyId client, const std::vector<InstanceLabel>& labels,
                     const std::vector<uint64_t>& bank_values) override;
  void fill(uint64_t session, PartyId client, const std::vector<Fill>& fills) override;

  const std::map<PartyId, Registration>& registry() const { return registry_; }

  // Deviations for tests and localsim adversary flags.
  ServerTamper server_tamper;
  B2CTamper bank_tamper;
  std::optional<uint64_t> tamper_session;  // apply the tamper only here

 private:
  Endpoint& ep_;
  AuctionParams params_;
  ProtocolConfig cfg_;
  ChaChaStream& rng_;
  ElGamalKeypair keys_;
  std::map<PartyId, Registration> registry_;
};

// ---------------------------------------------------------------------------
// Orchestration.

struct OrchestratorHooks {
  // Pair order for multi-client processing; seeded shuffle when unset.
  std::optional<std::vector<std::pair<PartyId, PartyId>>> pair_order;
  // Client order for bank functionalities; seeded shuffle when unset.
  std::optional<std::vector<PartyId>> client_order;
  // Called after each session's fills were handed to the backend.
  std::function<void(const MatchLog&, const Backend&)> after_session;
};

// Seeded random order over all unordered pairs of `clients`.
std::vector<std::pair<PartyId, PartyId>> pair_order(const std::vector<PartyId>& clients, const Seed& seed);
// Seeded random order over clients (bank functionalities).
std::vector<PartyId> client_order(const std::vector<PartyId>& clients, const Seed& seed);

// `registrations` lists clients in registration order; only queue mode reads
// their placed orders.
MatchLog run_auction(const AuctionParams& params, const std::vector<Registration>& registrations,
                     const BankBook& bank, Backend& backend, const OrchestratorHooks& hooks = {});

// ---------------------------------------------------------------------------
// Networked roles.

Bytes encode_registration(const AuctionParams& params, const ClientBook& book);
// Throws DecodeError or ParameterError with the reason sent back to the client.
Registration decode_registration(const AuctionParams& params, PartyId client, std::span<const uint8_t> payload);

Bytes encode_fills(uint64_t session, const std::vector<Fill>& fills);
std::pair<uint64_t, std::vector<Fill>> decode_fills(std::span<const uint8_t> payload);

struct ServerOptions {
  ProtocolConfig cfg;
  size_t expected_clients = 2;
  std::chrono::milliseconds registration_window{60000};
  BankBook bank;
  OrchestratorHooks hooks;
  ServerTamper server_tamper;
  B2CTamper bank_tamper;
  std::optional<uint64_t> tamper_session;
};

// Registration window, then processing, then AuctionDone to every
// registered client. Returns the match log.
MatchLog run_server(Endpoint& ep, const AuctionParams& params, const ServerOptions& opt, ChaChaStream& rng);

struct ClientReport {
  PartyId id = 0;
  std::vector<Fill> fills;
  std::vector<std::pair<uint64_t, AbortReason>> aborts;
};

struct ClientOptions {
  ProtocolConfig cfg;
  std::chrono::milliseconds ack_timeout{60000};
  std::chrono::milliseconds idle_timeout{600000};  // wait for the next announcement
  ClientTamper tamper;
  B2CTamper b2c_tamper;
  std::optional<uint64_t> tamper_session;
  std::function<void()> registered;  // called once the server acknowledged
};

// Registers `book`, then serves announced sessions until AuctionDone. Throws
// ParameterError if the server rejects the registration.
ClientReport run_client(Endpoint& ep, const AuctionParams& params, ClientBook& book, const ClientOptions& opt,
                        ChaChaStream& rng);

// ---------------------------------------------------------------------------
// In-process runs of a whole auction.

struct SimClient {
  PartyId id = 0;
  std::vector<Order> orders;
};

struct SimOptions {
  bool distributed = true;  // false: plain evaluation
  ProtocolConfig cfg;
  OrchestratorHooks hooks;
  std::map<PartyId, ClientTamper> client_tamper;
  std::map<PartyId, B2CTamper> client_b2c_tamper;
  ServerTamper server_tamper;
  B2CTamper bank_tamper;
  std::optional<uint64_t> tamper_session;
  Router::Adversary adversary;
  bool record = false;
};

struct SimResult {
  MatchLog log;
  std::vector<ClientReport> clients;
  std::vector<RelayRecord> records;
  RelayMetrics metrics;
};

// The book localsim builds for `c`, including its commitment randomness.
ClientBook localsim_book(const AuctionParams& params, const SimClient& c);

// Party randomness is derived from params.seed, so runs are reproducible.
SimResult run_localsim(const AuctionParams& params, const std::vector<SimClient>& clients,
                       const std::vector<Order>& bank_orders, const SimOptions& opt = {});

}  // namespace primematch
