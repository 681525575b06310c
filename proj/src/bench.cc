#include "primematch/bench.h"

#include <chrono>
#include <cstdio>
#include <map>

#include <json.hpp>

namespace primematch {

std::string_view phase_of(MsgType t) {
  switch (t) {
    case MsgType::Handshake1:
    case MsgType::Handshake2:
    case MsgType::Handshake3: return "handshake";
    case MsgType::Sealed: return "channel";
    case MsgType::DShares:
    case MsgType::DSharesMalicious: return "shares";
    case MsgType::Verdict: return "verdict";
    case MsgType::Reveal:
    case MsgType::MinNotice:
    case MsgType::SessionDone: return "reveal";
    case MsgType::B2CStatement:
    case MsgType::B2CReply:
    case MsgType::B2CVerdict:
    case MsgType::B2CClientReveal:
    case MsgType::B2COutcome: return "b2c";
    default: return "control";
  }
}

std::string BenchReport::to_json() const {
  nlohmann::ordered_json j;
  j["symbols"] = symbols;
  if (symbols == 0) {
    j["phases"] = nlohmann::ordered_json::object();
    return j.dump();
  }
  j["functionality"] = functionality_name(functionality);
  j["mode"] = security_mode_name(mode);
  j["n"] = n;
  j["seconds"] = seconds;
  j["latency_ms_per_symbol"] = seconds * 1000.0 / static_cast<double>(symbols);
  j["throughput_symbols_per_s"] = throughput();
  j["matches"] = matches;
  j["bytes_total"] = bytes_total;
  j["bytes_per_symbol"] = bytes_per_symbol();
  auto& ph = j["phases"] = nlohmann::ordered_json::object();
  for (const auto& p : phases)
    ph[p.name] = {{"envelopes", p.envelopes}, {"client_bytes", p.client_bytes}, {"server_bytes", p.server_bytes}};
  j["reference_throughput_tx_per_s"] = "8.96-10.09";
  return j.dump();
}

BenchReport run_bench(Functionality f, SecurityMode mode, unsigned n, size_t symbols, const Seed& seed) {
  BenchReport rep;
  rep.symbols = symbols;
  rep.functionality = f;
  rep.mode = mode;
  rep.n = n;
  if (symbols == 0) return rep;

  std::vector<std::string> names;
  for (size_t i = 0; i < symbols; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "S%04zu", i);
    names.push_back(buf);
  }
  AuctionParams p;
  p.functionality = f;
  p.mode = mode;
  p.n = n;
  p.universe = SymbolUniverse(names);
  p.seed = seed;

  ChaChaStream rng(derive_seed(seed, "primematch-bench"));
  uint64_t limit = n >= 64 ? ~uint64_t{0} : (uint64_t{1} << n);
  auto amount = [&] {
    uint64_t v = (uint64_t{rng.next_u32()} << 32) | rng.next_u32();
    return v % limit;
  };
  auto make = [&](Side side) {
    Order o{"", side, 0, 0};
    uint64_t a = amount(), b = amount();
    o.min_amount = is_range(f) ? std::min(a, b) : a;
    o.max_amount = is_range(f) ? std::max(a, b) : a;
    return o;
  };
  std::vector<SimClient> clients{{1, {}}};
  std::vector<Order> bank;
  if (!is_bank(f)) clients.push_back({2, {}});
  for (const auto& s : names) {
    Order buy = make(Side::Buy), sell = make(Side::Sell);
    buy.symbol = sell.symbol = s;
    clients[0].orders.push_back(buy);
    if (is_bank(f)) {
      sell.min_amount = sell.max_amount;
      bank.push_back(sell);
    } else {
      clients[1].orders.push_back(sell);
    }
  }

  SimOptions opt;
  opt.record = true;
  opt.cfg.timeout = std::chrono::milliseconds(120000);
  auto t0 = std::chrono::steady_clock::now();
  SimResult r = run_localsim(p, clients, bank, opt);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rep.matches = r.log.matches().size();

  std::map<std::string, BenchPhase> phases;
  for (const auto& rec : r.records) {
    const auto& e = rec.envelope;
    uint64_t size = encode_frame(envelope_to_frame(e)).size();
    auto& ph = phases[std::string(phase_of(e.type))];
    ph.name = phase_of(e.type);
    ++ph.envelopes;
    (e.sender == kServerId ? ph.server_bytes : ph.client_bytes) += size;
    rep.bytes_total += size;
  }
  for (auto& [_, ph] : phases) rep.phases.push_back(ph);
  return rep;
}

}  // namespace primematch
