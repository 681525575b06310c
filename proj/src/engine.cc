#include "primematch/engine.h"

#include <algorithm>
#include <charconv>
#include <condition_variable>
#include <exception>
#include <fstream>
#include <istream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace primematch {

namespace {

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  for (;;) {
    size_t pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool valid_symbol(std::string_view s) {
  if (s.empty() || s.size() > 64) return false;
  for (char c : s)
    if (c == '|' || c == ',' || std::isspace(static_cast<unsigned char>(c)) || !std::isprint(static_cast<unsigned char>(c)))
      return false;
  return true;
}

uint64_t amount_limit(unsigned n) { return n >= 64 ? ~uint64_t{0} : (uint64_t{1} << n); }

Point amount_point(uint64_t q) { return Point::base_mul(Scalar::from_u64(q)); }

}  // namespace

std::string_view side_name(Side s) { return s == Side::Buy ? "buy" : "sell"; }

Side side_from_name(std::string_view name) {
  std::string l = lower(std::string(name));
  if (l == "buy" || l == "long") return Side::Buy;
  if (l == "sell" || l == "short") return Side::Sell;
  throw ParameterError("unknown side '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

SymbolUniverse::SymbolUniverse(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  std::set<std::string> seen;
  for (const auto& s : symbols_) {
    if (!valid_symbol(s)) throw ParameterError("invalid symbol '" + s + "'");
    if (!seen.insert(s).second) throw ParameterError("duplicate symbol '" + s + "'");
  }
}

bool SymbolUniverse::contains(std::string_view s) const {
  return std::find(symbols_.begin(), symbols_.end(), s) != symbols_.end();
}

SymbolUniverse SymbolUniverse::parse(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::string t = trim(line);
    if (!t.empty()) out.push_back(t);
  }
  return SymbolUniverse(std::move(out));
}

// ---------------------------------------------------------------------------

namespace {

uint64_t parse_amount(const std::string& field, const char* what, size_t row, unsigned n) {
  uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
    throw ParameterError("row " + std::to_string(row) + ": " + what + " '" + field + "' is not a non-negative integer");
  if (v >= amount_limit(n))
    throw ParameterError("row " + std::to_string(row) + ": " + what + " " + field + " does not fit in " +
                         std::to_string(n) + " bits");
  return v;
}

void check_order(const Order& o, size_t row, const SymbolUniverse& u, unsigned n, bool ranged,
                 std::set<std::string>& seen, bool both_sides = false) {
  auto at = [&] { return "row " + std::to_string(row) + ": "; };
  if (!u.contains(o.symbol)) throw ParameterError(at() + "symbol '" + o.symbol + "' is not in the universe");
  if (o.min_amount > o.max_amount)
    throw ParameterError(at() + "min_qty " + std::to_string(o.min_amount) + " exceeds max_qty " +
                         std::to_string(o.max_amount));
  if (o.max_amount >= amount_limit(n))
    throw ParameterError(at() + "max_qty does not fit in " + std::to_string(n) + " bits");
  if (!ranged && o.min_amount != o.max_amount)
    throw ParameterError(at() + "min_qty and max_qty differ but the functionality takes a single amount");
  std::string key = both_sides ? o.symbol + "|" + std::string(side_name(o.side)) : o.symbol;
  if (!seen.insert(key).second) throw ParameterError(at() + "second order for symbol '" + o.symbol + "'");
}

}  // namespace

std::vector<Order> parse_orders_csv(std::istream& in, const SymbolUniverse& u, unsigned n, bool bank) {
  std::vector<Order> out;
  std::set<std::string> seen;
  std::string line;
  size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto f = split(line, ',');
    if (row == 1 && lower(f[0]) == "symbol") continue;
    if (f.size() != 4)
      throw ParameterError("row " + std::to_string(row) + ": expected 4 fields (symbol,side,min_qty,max_qty), got " +
                           std::to_string(f.size()));
    Order o;
    o.symbol = f[0];
    try {
      o.side = side_from_name(f[1]);
    } catch (const ParameterError& e) {
      throw ParameterError("row " + std::to_string(row) + ": " + e.what());
    }
    o.min_amount = parse_amount(f[2], "min_qty", row, n);
    o.max_amount = parse_amount(f[3], "max_qty", row, n);
    check_order(o, row, u, n, !bank, seen, bank);
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<Order> load_orders_csv(const std::string& path, const SymbolUniverse& u, unsigned n, bool bank) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open orders file '" + path + "'");
  return parse_orders_csv(in, u, n, bank);
}

void validate_orders(const std::vector<Order>& orders, const SymbolUniverse& u, unsigned n, bool ranged) {
  std::set<std::string> seen;
  for (size_t i = 0; i < orders.size(); ++i) check_order(orders[i], i + 1, u, n, ranged, seen);
}

void validate_bank_orders(const std::vector<Order>& orders, const SymbolUniverse& u, unsigned n) {
  std::set<std::string> seen;
  for (size_t i = 0; i < orders.size(); ++i) check_order(orders[i], i + 1, u, n, false, seen, true);
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::pair<Functionality, std::string_view> kFunctionalityNames[] = {
    {Functionality::BankToClient, "b2c"},       {Functionality::ClientToClient, "c2c"},
    {Functionality::MultiClient, "multi"},      {Functionality::Queue, "queue"},
    {Functionality::RangeBankToClient, "range-b2c"}, {Functionality::RangeClientToClient, "range-c2c"},
};

}  // namespace

std::string_view functionality_name(Functionality f) {
  for (auto [k, v] : kFunctionalityNames)
    if (k == f) return v;
  return "unknown";
}

Functionality functionality_from_name(std::string_view name) {
  for (auto [k, v] : kFunctionalityNames)
    if (v == name) return k;
  throw ParameterError("unknown functionality '" + std::string(name) + "'");
}

bool is_range(Functionality f) {
  return f == Functionality::RangeBankToClient || f == Functionality::RangeClientToClient;
}

bool is_bank(Functionality f) { return f == Functionality::BankToClient || f == Functionality::RangeBankToClient; }

std::string_view pass_name(PassTag p) {
  switch (p) {
    case PassTag::Plain: return "plain";
    case PassTag::MinPass: return "min-pass";
    case PassTag::MaxPass: return "max-pass";
  }
  return "unknown";
}

namespace {

bool uses_commitments(const AuctionParams& p) {
  return p.mode == SecurityMode::Malicious && !is_bank(p.functionality) && !is_range(p.functionality);
}

}  // namespace

void validate_params(const AuctionParams& p) {
  if (p.n < 1 || p.n > 63) throw ParameterError("n: must be between 1 and 63");
  if (!comparison_bound_holds(p.n)) throw ParameterError("n: comparison bound fails for this width");
  if (p.functionality == Functionality::RangeClientToClient && p.mode == SecurityMode::Malicious)
    throw ParameterError("mode: range-c2c runs only in semi-honest mode");
}

// ---------------------------------------------------------------------------

std::vector<MatchRecord> MatchLog::matches() const {
  std::vector<MatchRecord> out;
  for (const auto& e : events)
    if (e.match) out.push_back(*e.match);
  return out;
}

std::vector<AbortRecord> MatchLog::aborts() const {
  std::vector<AbortRecord> out;
  for (const auto& e : events)
    if (e.abort) out.push_back(*e.abort);
  return out;
}

std::string MatchLog::to_jsonl() const {
  using nlohmann::ordered_json;
  std::string out;
  ordered_json h;
  h["event"] = "header";
  h["auction"] = params.auction;
  h["functionality"] = functionality_name(params.functionality);
  h["mode"] = security_mode_name(params.mode);
  h["n"] = params.n;
  h["seed"] = to_hex(params.seed);
  h["symbols"] = params.universe.symbols();
  h["clients"] = clients;
  out += h.dump() + "\n";
  uint64_t t = 0, volume = 0, nmatch = 0, nabort = 0;
  for (const auto& e : events) {
    ordered_json j;
    ++t;
    if (e.match) {
      const auto& m = *e.match;
      j["event"] = "match";
      j["t"] = t;
      j["session"] = m.session;
      j["symbol"] = m.symbol;
      j["buyer"] = m.buyer;
      j["seller"] = m.seller;
      j["quantity"] = m.quantity;
      j["pass"] = pass_name(m.pass);
      volume += m.quantity;
      ++nmatch;
    } else if (e.abort) {
      const auto& a = *e.abort;
      j["event"] = "abort";
      j["t"] = t;
      j["session"] = a.session;
      j["parties"] = a.parties;
      j["reason"] = abort_reason_name(a.reason);
      ++nabort;
    } else {
      continue;
    }
    out += j.dump() + "\n";
  }
  ordered_json s;
  s["event"] = "summary";
  s["t"] = t + 1;
  s["matches"] = nmatch;
  s["aborts"] = nabort;
  s["volume"] = volume;
  out += s.dump() + "\n";
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string_view field_name(Field f) { return f == Field::Min ? "min" : "max"; }

Field field_from_name(std::string_view s) {
  if (s == "min") return Field::Min;
  if (s == "max") return Field::Max;
  throw DecodeError("bad label field");
}

InstanceLabel parse_label(std::string_view s, size_t parts) {
  auto f = split(s, '|');
  if (f.size() != parts || !valid_symbol(f[0])) throw DecodeError("bad instance label '" + std::string(s) + "'");
  InstanceLabel l;
  l.symbol = f[0];
  if (f[1] == "buy")
    l.side = Side::Buy;
  else if (f[1] == "sell")
    l.side = Side::Sell;
  else
    throw DecodeError("bad label side");
  l.own = field_from_name(f[2]);
  if (parts == 4) l.other = field_from_name(f[3]);
  return l;
}

}  // namespace

std::string InstanceLabel::encode_pair() const {
  return symbol + "|" + std::string(side_name(side)) + "|" + std::string(field_name(own)) + "|" +
         std::string(field_name(other));
}

std::string InstanceLabel::encode_bank() const {
  return symbol + "|" + std::string(side_name(side)) + "|" + std::string(field_name(own));
}

InstanceLabel InstanceLabel::parse_pair(std::string_view s) { return parse_label(s, 4); }
InstanceLabel InstanceLabel::parse_bank(std::string_view s) { return parse_label(s, 3); }

// ---------------------------------------------------------------------------

ClientBook::ClientBook(PartyId id, const SymbolUniverse& u, const std::vector<Order>& orders, ChaChaStream& rng)
    : id_(id) {
  for (const auto& sym : u.symbols())
    for (Side s : {Side::Buy, Side::Sell}) {
      Entry e;
      e.r_min = Scalar::random(rng);
      e.r_max = Scalar::random(rng);
      entries_[{sym, s}] = e;
    }
  for (const auto& o : orders) {
    auto it = entries_.find({o.symbol, o.side});
    if (it == entries_.end()) throw ParameterError("symbol '" + o.symbol + "' is not in the universe");
    it->second.min = o.min_amount;
    it->second.max = o.max_amount;
    if (o.max_amount > 0) {
      it->second.present = true;
      placed_.push_back({o.symbol, o.side});
    }
  }
}

const ClientBook::Entry& ClientBook::entry(const OrderKey& k) const {
  auto it = entries_.find(k);
  if (it == entries_.end()) throw UsageError("unknown order key " + k.symbol);
  return it->second;
}

uint64_t ClientBook::value(const OrderKey& k, Field f) const {
  const auto& e = entry(k);
  return f == Field::Min ? e.min : e.max;
}

const Scalar& ClientBook::randomness(const OrderKey& k, Field f) const {
  const auto& e = entry(k);
  return f == Field::Min ? e.r_min : e.r_max;
}

Point ClientBook::commitment(const OrderKey& k, Field f) const {
  return PedersenParams::standard().commit(Scalar::from_u64(value(k, f)), randomness(k, f));
}

void ClientBook::apply(const Fill& f) {
  OrderKey k{f.symbol, f.side};
  auto it = entries_.find(k);
  if (it == entries_.end()) throw UsageError("fill for unknown symbol '" + f.symbol + "'");
  auto& e = it->second;
  if (f.quantity > e.max) throw UsageError("fill of " + std::to_string(f.quantity) + " exceeds residual");
  e.max -= f.quantity;
  e.min -= std::min(e.min, f.quantity);
  filled_[k] += f.quantity;
}

uint64_t ClientBook::filled(const OrderKey& k) const {
  auto it = filled_.find(k);
  return it == filled_.end() ? 0 : it->second;
}

BankBook::BankBook(const SymbolUniverse& u, const std::vector<Order>& orders) {
  for (const auto& o : orders) {
    if (!u.contains(o.symbol)) throw ParameterError("bank symbol '" + o.symbol + "' is not in the universe");
    amounts_[{o.symbol, o.side}] = o.max_amount;
  }
}

uint64_t BankBook::residual(const OrderKey& k) const {
  auto it = amounts_.find(k);
  return it == amounts_.end() ? 0 : it->second;
}

void BankBook::take(const OrderKey& k, uint64_t q) {
  auto& a = amounts_[k];
  if (q > a) throw UsageError("bank fill exceeds residual");
  a -= q;
}

// ---------------------------------------------------------------------------

PlainBackend::PlainBackend(std::vector<ClientBook> books) : books_(std::move(books)) {}

const ClientBook& PlainBackend::book(PartyId id) const {
  for (const auto& b : books_)
    if (b.id() == id) return b;
  throw UsageError("no book for client " + std::to_string(id));
}

ClientBook& PlainBackend::mut(PartyId id) { return const_cast<ClientBook&>(book(id)); }

SessionResult PlainBackend::pair(uint64_t, PartyId a, PartyId b, const std::vector<InstanceLabel>& labels) {
  SessionResult r;
  for (const auto& l : labels) {
    uint64_t v0 = book(a).value({l.symbol, l.side}, l.own);
    uint64_t v1 = book(b).value({l.symbol, opposite(l.side)}, l.other);
    r.results.push_back({v0 <= v1, v1 <= v0, std::min(v0, v1)});
  }
  return r;
}

SessionResult PlainBackend::bank(uint64_t, PartyId client, const std::vector<InstanceLabel>& labels,
                                 const std::vector<uint64_t>& bank_values) {
  SessionResult r;
  for (size_t k = 0; k < labels.size(); ++k) {
    uint64_t v0 = bank_values[k];
    uint64_t v1 = book(client).value({labels[k].symbol, labels[k].side}, labels[k].own);
    r.results.push_back({v0 <= v1, v1 <= v0, std::min(v0, v1)});
  }
  return r;
}

void PlainBackend::fill(uint64_t, PartyId client, const std::vector<Fill>& fills) {
  for (const auto& f : fills) mut(client).apply(f);
}

// ---------------------------------------------------------------------------

NetworkBackend::NetworkBackend(Endpoint& ep, const AuctionParams& params, const ProtocolConfig& cfg,
                               ChaChaStream& rng, std::map<PartyId, Registration> registry)
    : ep_(ep), params_(params), cfg_(cfg), rng_(rng), keys_(ElGamalKeypair::generate(rng)),
      registry_(std::move(registry)) {
  cfg_.n = params.n;
}

SessionResult NetworkBackend::pair(uint64_t session, PartyId a, PartyId b, const std::vector<InstanceLabel>& labels) {
  std::vector<InstanceSpec> specs;
  bool committed = uses_commitments(params_);
  for (const auto& l : labels) {
    InstanceSpec s;
    s.label = l.encode_pair();
    if (committed) {
      s.v0 = registry_.at(a).commitments.at({l.symbol, l.side});
      s.v1 = registry_.at(b).commitments.at({l.symbol, opposite(l.side)});
    }
    specs.push_back(std::move(s));
  }
  bool tamper = !tamper_session || *tamper_session == session;
  SessionResult r;
  try {
    auto out = pair_session_server(ep_, session, params_.auction, a, b, params_.mode, specs, cfg_, rng_,
                                   tamper ? server_tamper : ServerTamper{});
    for (const auto& o : out) r.results.push_back({o.b0, o.b1, o.minimum});
  } catch (const ProtocolAbort& e) {
    r.abort = e.reason();
    r.detail = e.what();
  }
  return r;
}

SessionResult NetworkBackend::bank(uint64_t session, PartyId client, const std::vector<InstanceLabel>& labels,
                                   const std::vector<uint64_t>& bank_values) {
  std::vector<std::string> names;
  std::vector<B2CBankInput> inputs;
  for (size_t k = 0; k < labels.size(); ++k) {
    names.push_back(labels[k].encode_bank());
    inputs.push_back({bank_values[k], Scalar::random(rng_)});
  }
  bool tamper = !tamper_session || *tamper_session == session;
  SessionResult r;
  try {
    auto out = b2c_bank(ep_, session, params_.auction, client, keys_, names, inputs, cfg_, rng_,
                        tamper ? bank_tamper : B2CTamper{});
    for (const auto& o : out) r.results.push_back({o.bank_bit, o.client_bit, o.minimum});
  } catch (const ProtocolAbort& e) {
    r.abort = e.reason();
    r.detail = e.what();
  }
  return r;
}

void NetworkBackend::fill(uint64_t session, PartyId client, const std::vector<Fill>& fills) {
  auto& reg = registry_.at(client);
  for (const auto& f : fills) {
    auto it = reg.commitments.find({f.symbol, f.side});
    if (it != reg.commitments.end()) it->second -= amount_point(f.quantity);
  }
  Envelope e;
  e.type = MsgType::Fill;
  e.session = PairStart::kControlSession;
  e.auction = params_.auction;
  e.recipient = client;
  e.payload = encode_fills(session, fills);
  ep_.send(std::move(e));
}

// ---------------------------------------------------------------------------

namespace {

template <class T>
void shuffle(std::vector<T>& v, const Seed& seed, std::string_view label) {
  ChaChaStream rng(derive_seed(seed, label));
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = rng.uniform_below(static_cast<uint32_t>(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

std::vector<std::pair<PartyId, PartyId>> pair_order(const std::vector<PartyId>& clients, const Seed& seed) {
  std::vector<PartyId> ids = clients;
  std::sort(ids.begin(), ids.end());
  std::vector<std::pair<PartyId, PartyId>> out;
  for (size_t i = 0; i < ids.size(); ++i)
    for (size_t j = i + 1; j < ids.size(); ++j) out.emplace_back(ids[i], ids[j]);
  shuffle(out, seed, "primematch-pair-order");
  return out;
}

std::vector<PartyId> client_order(const std::vector<PartyId>& clients, const Seed& seed) {
  std::vector<PartyId> ids = clients;
  std::sort(ids.begin(), ids.end());
  shuffle(ids, seed, "primematch-client-order");
  return ids;
}

namespace {

class Orchestrator {
 public:
  Orchestrator(const AuctionParams& p, const std::vector<Registration>& regs, const BankBook& bank, Backend& backend,
               const OrchestratorHooks& hooks)
      : p_(p), regs_(regs), bank_(bank), backend_(backend), hooks_(hooks) {
    log_.params = p;
    for (const auto& r : regs) log_.clients.push_back(r.client);
    std::sort(log_.clients.begin(), log_.clients.end());
  }

  MatchLog run() {
    switch (p_.functionality) {
      case Functionality::BankToClient: bank_pass(clients(), Field::Max, PassTag::Plain); break;
      case Functionality::RangeBankToClient: {
        auto order = clients();
        bank_pass(order, Field::Min, PassTag::MinPass);
        bank_pass(order, Field::Max, PassTag::MaxPass);
        break;
      }
      case Functionality::ClientToClient:
      case Functionality::MultiClient:
        for (auto [a, b] : pairs()) pair_plain(a, b);
        break;
      case Functionality::Queue: queues(); break;
      case Functionality::RangeClientToClient:
        for (auto [a, b] : pairs()) pair_range(a, b);
        break;
    }
    return std::move(log_);
  }

 private:
  struct Exec {
    std::string symbol;
    Side side0;  // role 0's side (or the client's, for bank sessions)
    uint64_t quantity;
    PassTag pass;
  };

  std::vector<PartyId> clients() const {
    return hooks_.client_order ? *hooks_.client_order : client_order(log_.clients, p_.seed);
  }

  std::vector<std::pair<PartyId, PartyId>> pairs() const {
    return hooks_.pair_order ? *hooks_.pair_order : pair_order(log_.clients, p_.seed);
  }

  bool aborted(uint64_t session, const SessionResult& r, std::vector<PartyId> parties) {
    if (!r.abort) return false;
    log_.events.push_back({std::nullopt, AbortRecord{session, std::move(parties), *r.abort}});
    after(session);
    return true;
  }

  void after(uint64_t) {
    if (hooks_.after_session) hooks_.after_session(log_, backend_);
  }

  // Executes nonzero fills between two clients and tells both.
  void execute_pair(uint64_t session, PartyId a, PartyId b, const std::vector<Exec>& execs) {
    std::vector<Fill> fa, fb;
    for (const auto& x : execs) {
      if (x.quantity == 0) continue;
      MatchRecord m;
      m.symbol = x.symbol;
      m.buyer = x.side0 == Side::Buy ? a : b;
      m.seller = x.side0 == Side::Buy ? b : a;
      m.quantity = x.quantity;
      m.pass = x.pass;
      m.session = session;
      log_.events.push_back({m, std::nullopt});
      fa.push_back({x.symbol, x.side0, x.quantity, b, x.pass});
      fb.push_back({x.symbol, opposite(x.side0), x.quantity, a, x.pass});
    }
    if (!fa.empty()) backend_.fill(session, a, fa);
    if (!fb.empty()) backend_.fill(session, b, fb);
  }

  std::vector<InstanceLabel> both_sides(Field f) const {
    std::vector<InstanceLabel> out;
    for (const auto& sym : p_.universe.symbols())
      for (Side s : {Side::Buy, Side::Sell}) out.push_back({sym, s, f, f});
    return out;
  }

  void pair_plain(PartyId a, PartyId b) {
    uint64_t session = ++session_;
    auto labels = both_sides(Field::Max);
    auto r = backend_.pair(session, a, b, labels);
    if (aborted(session, r, {a, b})) return;
    std::vector<Exec> execs;
    for (size_t k = 0; k < labels.size(); ++k)
      execs.push_back({labels[k].symbol, labels[k].side, r.results[k].minimum, PassTag::Plain});
    execute_pair(session, a, b, execs);
    after(session);
  }

  void bank_pass(const std::vector<PartyId>& order, Field f, PassTag tag) {
    for (PartyId c : order) {
      uint64_t session = ++session_;
      auto labels = both_sides(f);
      std::vector<uint64_t> bank_values;
      for (const auto& l : labels) bank_values.push_back(bank_.residual({l.symbol, opposite(l.side)}));
      auto r = backend_.bank(session, c, labels, bank_values);
      if (aborted(session, r, {c})) continue;
      std::vector<Fill> fills;
      for (size_t k = 0; k < labels.size(); ++k) {
        uint64_t q = r.results[k].minimum;
        if (q == 0) continue;
        const auto& l = labels[k];
        MatchRecord m;
        m.symbol = l.symbol;
        m.buyer = l.side == Side::Buy ? c : kServerId;
        m.seller = l.side == Side::Buy ? kServerId : c;
        m.quantity = q;
        m.pass = tag;
        m.session = session;
        log_.events.push_back({m, std::nullopt});
        bank_.take({l.symbol, opposite(l.side)}, q);
        fills.push_back({l.symbol, l.side, q, kServerId, tag});
      }
      if (!fills.empty()) backend_.fill(session, c, fills);
      after(session);
    }
  }

  void queues() {
    for (const auto& sym : p_.universe.symbols()) {
      std::deque<PartyId> longs, shorts;
      for (const auto& r : regs_)
        for (const auto& k : r.placed)
          if (k.symbol == sym) (k.side == Side::Buy ? longs : shorts).push_back(r.client);
      while (!longs.empty() && !shorts.empty()) {
        PartyId a = longs.front(), b = shorts.front();
        if (a == b) {
          // One client on both sides; nothing to match against itself.
          shorts.pop_front();
          continue;
        }
        uint64_t session = ++session_;
        std::vector<InstanceLabel> labels{{sym, Side::Buy, Field::Max, Field::Max}};
        auto r = backend_.pair(session, a, b, labels);
        if (aborted(session, r, {a, b})) {
          longs.pop_front();
          shorts.pop_front();
          continue;
        }
        const auto& res = r.results[0];
        execute_pair(session, a, b, {{sym, Side::Buy, res.minimum, PassTag::Plain}});
        if (res.b0) longs.pop_front();
        if (res.b1) shorts.pop_front();
        after(session);
      }
    }
  }

  // Three steps per (symbol, direction); each step is one session over all
  // directions still live.
  void pair_range(PartyId a, PartyId b) {
    struct Dir {
      std::string symbol;
      Side side0;
    };
    // Buyer contributes `fb`, seller `fs`; translate to role fields.
    auto label = [](const Dir& d, Field fb, Field fs) {
      return d.side0 == Side::Buy ? InstanceLabel{d.symbol, Side::Buy, fb, fs}
                                  : InstanceLabel{d.symbol, Side::Sell, fs, fb};
    };
    auto buyer_bit = [](const Dir& d, const InstanceResult& r) { return d.side0 == Side::Buy ? r.b0 : r.b1; };
    auto seller_bit = [](const Dir& d, const InstanceResult& r) { return d.side0 == Side::Buy ? r.b1 : r.b0; };

    std::vector<Dir> dirs;
    for (const auto& sym : p_.universe.symbols())
      for (Side s : {Side::Buy, Side::Sell}) dirs.push_back({sym, s});

    // Step 1: buyer min against seller max, buyer max against seller min.
    uint64_t session = ++session_;
    std::vector<InstanceLabel> labels;
    for (const auto& d : dirs) {
      labels.push_back(label(d, Field::Min, Field::Max));
      labels.push_back(label(d, Field::Max, Field::Min));
    }
    auto r = backend_.pair(session, a, b, labels);
    if (aborted(session, r, {a, b})) return;
    std::vector<Dir> live;
    std::vector<Exec> execs;
    for (size_t i = 0; i < dirs.size(); ++i) {
      const auto& lo = r.results[2 * i];
      const auto& hi = r.results[2 * i + 1];
      if (buyer_bit(dirs[i], lo) && seller_bit(dirs[i], hi)) {
        live.push_back(dirs[i]);
        execs.push_back({dirs[i].symbol, dirs[i].side0, lo.minimum, PassTag::MinPass});
      }
    }
    execute_pair(session, a, b, execs);
    after(session);
    if (live.empty()) return;

    // Step 2 tops the seller up to its residual minimum, step 3 fills the
    // smaller residual maximum.
    for (int step = 2; step <= 3; ++step) {
      session = ++session_;
      labels.clear();
      for (const auto& d : live) labels.push_back(label(d, Field::Max, step == 2 ? Field::Min : Field::Max));
      r = backend_.pair(session, a, b, labels);
      if (aborted(session, r, {a, b})) return;
      execs.clear();
      for (size_t i = 0; i < live.size(); ++i)
        execs.push_back({live[i].symbol, live[i].side0, r.results[i].minimum,
                         step == 2 ? PassTag::MinPass : PassTag::MaxPass});
      execute_pair(session, a, b, execs);
      after(session);
    }
  }

  const AuctionParams& p_;
  const std::vector<Registration>& regs_;
  BankBook bank_;
  Backend& backend_;
  const OrchestratorHooks& hooks_;
  MatchLog log_;
  uint64_t session_ = 0;
};

}  // namespace

MatchLog run_auction(const AuctionParams& params, const std::vector<Registration>& registrations,
                     const BankBook& bank, Backend& backend, const OrchestratorHooks& hooks) {
  validate_params(params);
  return Orchestrator(params, registrations, bank, backend, hooks).run();
}

// ---------------------------------------------------------------------------
// Registration and fill messages.

Bytes encode_registration(const AuctionParams& params, const ClientBook& book) {
  ByteWriter w;
  w.put_u8(static_cast<uint8_t>(params.functionality));
  w.put_u8(static_cast<uint8_t>(params.mode));
  w.put_u32(params.n);
  bool committed = uses_commitments(params);
  std::vector<OrderKey> keys;
  if (params.functionality == Functionality::Queue) {
    keys = book.placed();
  } else {
    for (const auto& sym : params.universe.symbols())
      for (Side s : {Side::Buy, Side::Sell}) keys.push_back({sym, s});
  }
  w.put_u32(static_cast<uint32_t>(keys.size()));
  for (const auto& k : keys) {
    w.put_string(k.symbol);
    w.put_u8(static_cast<uint8_t>(k.side));
    w.put_u8(committed ? 1 : 0);
    if (committed) w.put_raw(book.commitment(k, Field::Max).bytes());
  }
  return std::move(w).bytes();
}

Registration decode_registration(const AuctionParams& params, PartyId client, std::span<const uint8_t> payload) {
  ByteReader r(payload);
  if (r.get_u8() != static_cast<uint8_t>(params.functionality))
    throw ParameterError("functionality differs from the server's");
  if (r.get_u8() != static_cast<uint8_t>(params.mode)) throw ParameterError("security mode differs from the server's");
  if (r.get_u32() != params.n) throw ParameterError("bit width differs from the server's");
  bool committed = uses_commitments(params);
  size_t count = r.get_count(2 * params.universe.size());
  Registration reg;
  reg.client = client;
  std::set<OrderKey> seen;
  std::set<std::string> symbols;
  for (size_t i = 0; i < count; ++i) {
    OrderKey k;
    k.symbol = r.get_string(64);
    uint8_t side = r.get_u8();
    if (side > 1) throw DecodeError("bad side");
    k.side = static_cast<Side>(side);
    if (!params.universe.contains(k.symbol)) throw ParameterError("symbol '" + k.symbol + "' is not in the universe");
    if (!seen.insert(k).second) throw ParameterError("duplicate order for '" + k.symbol + "'");
    uint8_t has = r.get_u8();
    if (has != (committed ? 1 : 0)) throw ParameterError("commitment presence does not match the security mode");
    if (committed) reg.commitments[k] = Point::from_bytes(r.get_raw(Point::kSize));
    if (params.functionality == Functionality::Queue) {
      if (!symbols.insert(k.symbol).second) throw ParameterError("both sides placed for '" + k.symbol + "'");
      reg.placed.push_back(k);
    }
  }
  r.expect_done();
  if (params.functionality != Functionality::Queue && count != 2 * params.universe.size())
    throw ParameterError("registration must cover every symbol and side");
  return reg;
}

Bytes encode_fills(uint64_t session, const std::vector<Fill>& fills) {
  ByteWriter w;
  w.put_u64(session);
  w.put_u32(static_cast<uint32_t>(fills.size()));
  for (const auto& f : fills) {
    w.put_string(f.symbol);
    w.put_u8(static_cast<uint8_t>(f.side));
    w.put_u64(f.quantity);
    w.put_u32(f.counterparty);
    w.put_u8(static_cast<uint8_t>(f.pass));
  }
  return std::move(w).bytes();
}

std::pair<uint64_t, std::vector<Fill>> decode_fills(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  uint64_t session = r.get_u64();
  size_t count = r.get_count(1u << 16);
  std::vector<Fill> out;
  for (size_t i = 0; i < count; ++i) {
    Fill f;
    f.symbol = r.get_string(64);
    uint8_t side = r.get_u8();
    if (side > 1) throw DecodeError("bad side");
    f.side = static_cast<Side>(side);
    f.quantity = r.get_u64();
    f.counterparty = r.get_u32();
    uint8_t pass = r.get_u8();
    if (pass > 2) throw DecodeError("bad pass tag");
    f.pass = static_cast<PassTag>(pass);
    out.push_back(std::move(f));
  }
  r.expect_done();
  return {session, std::move(out)};
}

// ---------------------------------------------------------------------------

namespace {

void send_ack(Endpoint& ep, uint64_t auction, PartyId to, bool ok, const std::string& reason) {
  ByteWriter w;
  w.put_u8(ok ? 1 : 0);
  w.put_string(reason.substr(0, 1024));
  Envelope e;
  e.type = MsgType::RegisterAck;
  e.session = PairStart::kControlSession;
  e.auction = auction;
  e.recipient = to;
  e.payload = std::move(w).bytes();
  ep.send(std::move(e));
}

}  // namespace

MatchLog run_server(Endpoint& ep, const AuctionParams& params, const ServerOptions& opt, ChaChaStream& rng) {
  validate_params(params);
  std::map<PartyId, Registration> registry;
  std::vector<PartyId> order;
  auto deadline = std::chrono::steady_clock::now() + opt.registration_window;
  while (registry.size() < opt.expected_clients) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) break;
    Envelope e;
    try {
      e = ep.recv(PairStart::kControlSession, left);
    } catch (const ProtocolAbort& a) {
      if (a.reason() == AbortReason::Timeout) break;
      continue;
    }
    if (e.type != MsgType::RegisterOrders) continue;
    if (registry.count(e.sender)) {
      send_ack(ep, params.auction, e.sender, false, "already registered");
      continue;
    }
    try {
      registry[e.sender] = decode_registration(params, e.sender, e.payload);
      order.push_back(e.sender);
      send_ack(ep, params.auction, e.sender, true, "");
    } catch (const Error& err) {
      send_ack(ep, params.auction, e.sender, false, err.what());
    }
  }

  std::vector<Registration> regs;
  for (PartyId id : order) regs.push_back(registry.at(id));
  NetworkBackend backend(ep, params, opt.cfg, rng, std::move(registry));
  backend.server_tamper = opt.server_tamper;
  backend.bank_tamper = opt.bank_tamper;
  backend.tamper_session = opt.tamper_session;
  MatchLog log = run_auction(params, regs, opt.bank, backend, opt.hooks);
  for (PartyId id : order) send_auction_done(ep, params.auction, id);
  return log;
}

ClientReport run_client(Endpoint& ep, const AuctionParams& params, ClientBook& book, const ClientOptions& opt,
                        ChaChaStream& rng) {
  ProtocolConfig cfg = opt.cfg;
  cfg.n = params.n;
  ClientReport report;
  report.id = ep.id();

  Envelope reg;
  reg.type = MsgType::RegisterOrders;
  reg.session = PairStart::kControlSession;
  reg.auction = params.auction;
  reg.recipient = kServerId;
  reg.payload = encode_registration(params, book);
  ep.send(std::move(reg));
  for (;;) {
    Envelope e = ep.recv(PairStart::kControlSession, opt.ack_timeout);
    if (e.type != MsgType::RegisterAck) continue;
    ByteReader r(e.payload);
    bool ok = r.get_u8() == 1;
    std::string reason = r.get_string(1024);
    if (!ok) throw ParameterError("registration rejected: " + reason);
    break;
  }
  if (opt.registered) opt.registered();

  for (;;) {
    Envelope e = ep.recv(PairStart::kControlSession, opt.idle_timeout);
    if (e.type == MsgType::AuctionDone) break;
    if (e.type == MsgType::Fill) {
      try {
        auto [session, fills] = decode_fills(e.payload);
        for (const auto& f : fills) {
          book.apply(f);
          report.fills.push_back(f);
        }
      } catch (const Error& err) {
        throw ProtocolAbort(AbortReason::MalformedMessage, 0, std::string("bad fill: ") + err.what());
      }
      continue;
    }
    if (e.type != MsgType::PairStart) continue;
    PairStart start;
    try {
      start = PairStart::decode(e.payload);
    } catch (const DecodeError& err) {
      throw ProtocolAbort(AbortReason::MalformedMessage, 0, err.what());
    }
    bool tamper = !opt.tamper_session || *opt.tamper_session == start.session;
    try {
      if (start.is_bank_session()) {
        std::vector<uint64_t> values;
        for (const auto& inst : start.instances) {
          auto l = InstanceLabel::parse_bank(inst.label);
          values.push_back(book.value({l.symbol, l.side}, l.own));
        }
        b2c_client(ep, params.auction, start, values, cfg, rng, tamper ? opt.b2c_tamper : B2CTamper{});
      } else {
        std::vector<ClientInput> inputs;
        for (const auto& inst : start.instances) {
          auto l = InstanceLabel::parse_pair(inst.label);
          OrderKey k{l.symbol, start.role == 0 ? l.side : opposite(l.side)};
          Field f = start.role == 0 ? l.own : l.other;
          inputs.push_back({book.value(k, f), book.randomness(k, f)});
        }
        pair_session_client(ep, params.auction, start, inputs, cfg, rng, tamper ? opt.tamper : ClientTamper{});
      }
    } catch (const ProtocolAbort& a) {
      report.aborts.emplace_back(start.session, a.reason());
    } catch (const DecodeError&) {
      report.aborts.emplace_back(start.session, AbortReason::MalformedMessage);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

namespace {

Seed party_seed(const Seed& seed, std::string_view role, PartyId id) {
  ByteWriter w;
  w.put_u32(id);
  return derive_seed(seed, role, w.bytes());
}

}  // namespace

ClientBook localsim_book(const AuctionParams& params, const SimClient& c) {
  ChaChaStream rng(party_seed(params.seed, "primematch-client", c.id));
  return ClientBook(c.id, params.universe, c.orders, rng);
}

SimResult run_localsim(const AuctionParams& params, const std::vector<SimClient>& clients,
                       const std::vector<Order>& bank_orders, const SimOptions& opt) {
  validate_params(params);
  {
    std::set<PartyId> ids;
    for (const auto& c : clients)
      if (c.id == kServerId || !ids.insert(c.id).second)
        throw ParameterError("client ids must be distinct and nonzero");
  }
  bool ranged = is_range(params.functionality);
  for (const auto& c : clients) validate_orders(c.orders, params.universe, params.n, ranged);
  validate_bank_orders(bank_orders, params.universe, params.n);
  BankBook bank(params.universe, bank_orders);

  std::vector<ClientBook> books;
  for (const auto& c : clients) books.push_back(localsim_book(params, c));
  ChaChaStream server_rng(party_seed(params.seed, "primematch-server", kServerId));

  SimResult out;
  if (!opt.distributed) {
    std::vector<Registration> regs;
    for (const auto& b : books) {
      Registration r;
      r.client = b.id();
      r.placed = b.placed();
      regs.push_back(std::move(r));
    }
    PlainBackend backend(books);
    out.log = run_auction(params, regs, bank, backend, opt.hooks);
    for (const auto& c : clients) {
      ClientReport rep;
      rep.id = c.id;
      out.clients.push_back(rep);
    }
    // Fills per client, reconstructed from the log.
    for (const auto& m : out.log.matches())
      for (auto& rep : out.clients) {
        if (rep.id == m.buyer) rep.fills.push_back({m.symbol, Side::Buy, m.quantity, m.seller, m.pass});
        if (rep.id == m.seller) rep.fills.push_back({m.symbol, Side::Sell, m.quantity, m.buyer, m.pass});
      }
    return out;
  }

  LocalNetwork net;
  net.router().set_recording(opt.record);
  if (opt.adversary) net.router().set_adversary(opt.adversary);
  auto server_ep = net.connect(kServerId);
  std::vector<std::shared_ptr<Endpoint>> eps;
  for (const auto& c : clients) eps.push_back(net.connect(c.id));

  // Clients register one after another so queue positions follow their
  // order in `clients`.
  std::mutex mu;
  std::condition_variable cv;
  size_t turn = 0;
  out.clients.resize(clients.size());
  std::vector<std::exception_ptr> errors(clients.size());
  std::vector<std::thread> threads;
  for (size_t i = 0; i < clients.size(); ++i) {
    threads.emplace_back([&, i] {
      ChaChaStream rng(party_seed(params.seed, "primematch-client-session", clients[i].id));
      ClientOptions copt;
      copt.cfg = opt.cfg;
      copt.tamper_session = opt.tamper_session;
      if (auto it = opt.client_b2c_tamper.find(clients[i].id); it != opt.client_b2c_tamper.end())
        copt.b2c_tamper = it->second;
      if (auto it = opt.client_tamper.find(clients[i].id); it != opt.client_tamper.end()) copt.tamper = it->second;
      copt.registered = [&] {
        std::lock_guard lock(mu);
        ++turn;
        cv.notify_all();
      };
      try {
        {
          std::unique_lock lock(mu);
          cv.wait(lock, [&] { return turn == i; });
        }
        out.clients[i] = run_client(*eps[i], params, books[i], copt, rng);
      } catch (...) {
        errors[i] = std::current_exception();
        std::lock_guard lock(mu);
        if (turn == i) ++turn;
        cv.notify_all();
      }
    });
  }

  ServerOptions sopt;
  sopt.cfg = opt.cfg;
  sopt.expected_clients = clients.size();
  sopt.registration_window = std::max(opt.cfg.timeout, std::chrono::milliseconds(5000));
  sopt.bank = bank;
  sopt.hooks = opt.hooks;
  sopt.server_tamper = opt.server_tamper;
  sopt.bank_tamper = opt.bank_tamper;
  sopt.tamper_session = opt.tamper_session;
  std::exception_ptr server_error;
  try {
    out.log = run_server(*server_ep, params, sopt, server_rng);
  } catch (...) {
    server_error = std::current_exception();
    for (auto& ep : eps) ep->close();
  }
  for (auto& t : threads) t.join();
  if (server_error) std::rethrow_exception(server_error);
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  out.records = net.router().records();
  out.metrics = net.router().metrics();
  return out;
}

}  // namespace primematch
