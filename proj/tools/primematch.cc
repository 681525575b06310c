#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "primematch/bench.h"
#include "primematch/config.h"
#include "primematch/engine.h"

using namespace primematch;
using nlohmann::ordered_json;

namespace {

// Flags shared by every subcommand. Strings stay empty when not given so
// that they only override the config file when present.
struct Common {
  std::string config;
  std::string functionality;
  std::string mode;
  std::string seed;
  std::string symbols;
  unsigned n = 0;
  std::string log;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config file")->envname("PRIMEMATCH_CONFIG");
  app->add_option("--functionality", c.functionality, "b2c | c2c | multi | queue | range-b2c | range-c2c")
      ->envname("PRIMEMATCH_FUNCTIONALITY");
  app->add_option("--mode", c.mode, "semi-honest | malicious")->envname("PRIMEMATCH_MODE");
  app->add_option("--seed", c.seed, "auction seed, hex")->envname("PRIMEMATCH_SEED");
  app->add_option("--symbols", c.symbols, "symbol universe file, one per line")->envname("PRIMEMATCH_SYMBOLS");
  app->add_option("--n", c.n, "bit width, 2^m - 1")->envname("PRIMEMATCH_N");
  app->add_option("--log", c.log, "write JSON lines here instead of stdout")->envname("PRIMEMATCH_LOG");
}

Config resolve(const Common& c) {
  Config cfg;
  if (!c.config.empty()) cfg = load_config_file(c.config);
  if (!c.functionality.empty()) cfg.functionality = functionality_from_name(c.functionality);
  if (!c.mode.empty()) cfg.mode = security_mode_from_name(c.mode);
  if (!c.seed.empty()) cfg.seed = parse_seed(c.seed);
  if (!c.symbols.empty()) cfg.symbols_file = c.symbols;
  if (c.n) cfg.n = c.n;
  return cfg;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw ParameterError("cannot write '" + path + "'");
    }
  }
  std::ostream& out() { return file_.is_open() ? file_ : std::cout; }
  void line(const ordered_json& j) { out() << j.dump() << "\n" << std::flush; }

 private:
  std::ofstream file_;
};

ProtocolConfig protocol_config(const Config& cfg) {
  ProtocolConfig p;
  p.n = cfg.n;
  p.timeout = cfg.timeout;
  p.psk = cfg.psk;
  return p;
}

ClientTamper::Kind tamper_kind(const std::string& name) {
  for (auto k : {ClientTamper::Kind::ShareFlip, ClientTamper::Kind::RandomnessFlip, ClientTamper::Kind::NonBit,
                 ClientTamper::Kind::ComEqMismatch, ClientTamper::Kind::StatementSwap,
                 ClientTamper::Kind::BadOpening, ClientTamper::Kind::BadCoinOpen, ClientTamper::Kind::BadReveal})
    if (tamper_kind_name(k) == name) return k;
  throw ParameterError("unknown tamper kind '" + name + "'");
}

ordered_json fill_json(const Fill& f) {
  return {{"event", "fill"},       {"symbol", f.symbol},          {"side", side_name(f.side)},
          {"quantity", f.quantity}, {"counterparty", f.counterparty}, {"pass", pass_name(f.pass)}};
}

// ---------------------------------------------------------------------------

int cmd_server(const Common& common, const std::string& listen, size_t expected, uint64_t window_ms,
               const std::string& bank_orders, int metrics_port) {
  Config cfg = resolve(common);
  if (!listen.empty()) cfg.listen = listen;
  if (expected) cfg.expected_clients = expected;
  if (window_ms) cfg.registration_window = std::chrono::milliseconds(window_ms);
  if (metrics_port >= 0) cfg.metrics_port = static_cast<uint16_t>(metrics_port);
  if (!cfg.seed) cfg.seed = random_seed();
  AuctionParams params = auction_params(cfg);
  std::vector<Order> bank;
  if (!bank_orders.empty()) {
    bank = load_orders_csv(bank_orders, params.universe, params.n, true);
    validate_bank_orders(bank, params.universe, params.n);
  }
  auto [host, port] = parse_address(cfg.listen);
  TcpServer server(host, port, cfg.max_frame);
  Output out(common.log);
  std::cerr << ordered_json{{"event", "listening"}, {"port", server.port()}}.dump() << std::endl;

  httplib::Server metrics;
  std::thread metrics_thread;
  if (cfg.metrics_port) {
    metrics.Get("/metrics", [&](const httplib::Request&, httplib::Response& res) {
      res.set_content(server.router().metrics_text(), "text/plain");
    });
    metrics_thread = std::thread([&] { metrics.listen(host, cfg.metrics_port); });
  }

  ChaChaStream rng(derive_seed(*cfg.seed, "primematch-server"));
  for (unsigned round = 0; round < cfg.rounds; ++round) {
    if (round && cfg.interval.count()) std::this_thread::sleep_for(cfg.interval);
    AuctionParams p = params;
    p.auction = params.auction + round;
    ServerOptions opt;
    opt.cfg = protocol_config(cfg);
    opt.expected_clients = cfg.expected_clients;
    opt.registration_window = cfg.registration_window;
    opt.bank = BankBook(p.universe, bank);
    out.out() << run_server(*server.endpoint(), p, opt, rng).to_jsonl() << std::flush;
  }
  if (cfg.metrics_port) {
    metrics.stop();
    metrics_thread.join();
  }
  server.stop();
  return 0;
}

int cmd_client(const Common& common, const std::string& orders_path, const std::string& connect, PartyId id) {
  Config cfg = resolve(common);
  if (!connect.empty()) cfg.connect = connect;
  if (id) cfg.id = id;
  AuctionParams params = auction_params(cfg);
  if (orders_path.empty()) throw ParameterError("--orders is required");
  auto orders = load_orders_csv(orders_path, params.universe, params.n);
  validate_orders(orders, params.universe, params.n, is_range(params.functionality));

  Output out(common.log);
  ChaChaStream rng = cfg.seed ? ChaChaStream(derive_seed(*cfg.seed, "primematch-client")) : ChaChaStream::from_os();
  ClientBook book(cfg.id, params.universe, orders, rng);
  auto [host, port] = parse_address(cfg.connect);
  auto ep = tcp_connect(host, port, cfg.id, cfg.timeout, cfg.max_frame);
  ClientOptions opt;
  opt.cfg = protocol_config(cfg);
  opt.ack_timeout = cfg.registration_window + cfg.timeout;
  opt.registered = [&] { out.line({{"event", "registered"}, {"id", cfg.id}, {"orders", orders.size()}}); };
  ClientReport rep = run_client(*ep, params, book, opt, rng);
  for (const auto& f : rep.fills) out.line(fill_json(f));
  for (const auto& [session, reason] : rep.aborts)
    out.line({{"event", "abort"}, {"session", session}, {"reason", abort_reason_name(reason)}});
  out.line({{"event", "done"}, {"fills", rep.fills.size()}, {"aborts", rep.aborts.size()}});
  ep->close();
  return 0;
}

struct Adversary {
  std::string tamper;
  PartyId tamper_client = 1;
  uint64_t tamper_session = 0;
  size_t tamper_instance = 0;
  size_t tamper_slot = 0;
  bool forge_onemany = false;
  bool swap_commitments = false;
  bool bank_bad_bitproof = false;
  bool bank_forge_onemany = false;
  PartyId client_overclaims = 0;
};

int cmd_localsim(const Common& common, const std::vector<std::string>& order_files, const std::vector<PartyId>& ids,
                 const std::string& bank_orders, const std::string& engine, const Adversary& adv) {
  Config cfg = resolve(common);
  AuctionParams params = auction_params(cfg);
  if (!ids.empty() && ids.size() != order_files.size())
    throw ParameterError("--ids must list one id per --orders file");
  std::vector<SimClient> clients;
  for (size_t i = 0; i < order_files.size(); ++i)
    clients.push_back({ids.empty() ? static_cast<PartyId>(i + 1) : ids[i],
                       load_orders_csv(order_files[i], params.universe, params.n)});
  std::vector<Order> bank;
  if (!bank_orders.empty()) bank = load_orders_csv(bank_orders, params.universe, params.n, true);

  SimOptions opt;
  if (engine == "plain")
    opt.distributed = false;
  else if (engine != "protocol")
    throw ParameterError("--engine must be plain or protocol");
  opt.cfg = protocol_config(cfg);
  if (!adv.tamper.empty())
    opt.client_tamper[adv.tamper_client] = {tamper_kind(adv.tamper), adv.tamper_instance, adv.tamper_slot};
  if (adv.tamper_session) opt.tamper_session = adv.tamper_session;
  opt.server_tamper.forge_onemany = adv.forge_onemany;
  opt.server_tamper.swap_commitments = adv.swap_commitments;
  opt.bank_tamper.bad_bitproof = adv.bank_bad_bitproof;
  opt.bank_tamper.forge_onemany = adv.bank_forge_onemany;
  if (adv.client_overclaims) opt.client_b2c_tamper[adv.client_overclaims].client_overclaims = true;

  Output out(common.log);
  out.out() << run_localsim(params, clients, bank, opt).log.to_jsonl() << std::flush;
  return 0;
}

int cmd_bench(const Common& common, size_t count) {
  Config cfg = resolve(common);
  if (common.functionality.empty() && common.config.empty()) cfg.functionality = Functionality::ClientToClient;
  cfg.symbols = {"BENCH"};  // the universe is synthetic; this only validates the rest
  cfg.symbols_file.clear();
  auction_params(cfg);
  Output out(common.log);
  auto rep = run_bench(cfg.functionality, cfg.mode, cfg.n, count, cfg.seed.value_or(Seed{}));
  out.out() << rep.to_json() << "\n" << std::flush;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Private matching of buy and sell interest through a relay server"};
  app.require_subcommand(1);

  Common common;
  std::string listen, connect, bank_orders, engine = "protocol";
  std::vector<std::string> order_files;
  std::vector<PartyId> ids;
  size_t expected = 0, bench_count = 0;
  uint64_t window_ms = 0;
  int metrics_port = -1;
  PartyId id = 0;
  Adversary adv;

  auto* server = app.add_subcommand("server", "relay and auction orchestrator");
  add_common(server, common);
  server->add_option("--listen", listen, "host:port")->envname("PRIMEMATCH_LISTEN");
  server->add_option("--expected-clients", expected, "stop registration after this many clients")
      ->envname("PRIMEMATCH_EXPECTED_CLIENTS");
  server->add_option("--window-ms", window_ms, "registration window")->envname("PRIMEMATCH_WINDOW_MS");
  server->add_option("--bank-orders", bank_orders, "bank orders CSV (bank functionalities)");
  server->add_option("--metrics-port", metrics_port, "plain-text metrics on this port")
      ->envname("PRIMEMATCH_METRICS_PORT");

  auto* client = app.add_subcommand("client", "register orders and take part in an auction");
  add_common(client, common);
  client->add_option("--orders", order_files, "orders CSV: symbol,side,min_qty,max_qty")
      ->envname("PRIMEMATCH_ORDERS");
  client->add_option("--connect", connect, "server host:port")->envname("PRIMEMATCH_CONNECT");
  client->add_option("--id", id, "client id (nonzero)")->envname("PRIMEMATCH_ID");

  auto* sim = app.add_subcommand("localsim", "run a whole auction in-process");
  add_common(sim, common);
  sim->add_option("--orders", order_files, "one orders CSV per client")->envname("PRIMEMATCH_ORDERS")->delimiter(',');
  sim->add_option("--ids", ids, "client ids, one per orders file")->delimiter(',');
  sim->add_option("--bank-orders", bank_orders, "bank orders CSV");
  sim->add_option("--engine", engine, "protocol | plain");
  sim->add_option("--tamper", adv.tamper, "client deviation: share-flip, randomness-flip, non-bit, comeq-mismatch, "
                                          "statement-swap, bad-opening, bad-coin-open, bad-reveal");
  sim->add_option("--tamper-client", adv.tamper_client, "client that deviates");
  sim->add_option("--tamper-session", adv.tamper_session, "only deviate in this session");
  sim->add_option("--tamper-instance", adv.tamper_instance, "instance within the session");
  sim->add_option("--tamper-slot", adv.tamper_slot, "bit or share slot");
  sim->add_flag("--server-forge-onemany", adv.forge_onemany, "server claims a false win");
  sim->add_flag("--server-swap-commitments", adv.swap_commitments, "server hands out a wrong commitment");
  sim->add_flag("--bank-bad-bitproof", adv.bank_bad_bitproof, "bank encrypts a non-bit");
  sim->add_flag("--bank-forge-onemany", adv.bank_forge_onemany, "bank proves over the wrong list");
  sim->add_option("--client-overclaims", adv.client_overclaims, "client id that reveals too much in b2c");

  auto* bench = app.add_subcommand("bench", "time K symbols through a protocol");
  add_common(bench, common);
  bench->add_option("--bench-count", bench_count, "number of symbols")->envname("PRIMEMATCH_BENCH_COUNT");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*server) return cmd_server(common, listen, expected, window_ms, bank_orders, metrics_port);
    if (*client) return cmd_client(common, order_files.empty() ? "" : order_files.front(), connect, id);
    if (*sim) return cmd_localsim(common, order_files, ids, bank_orders, engine, adv);
    if (*bench) return cmd_bench(common, bench_count);
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
