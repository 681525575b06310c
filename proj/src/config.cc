#include "primematch/config.h"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace primematch {

namespace {

using nlohmann::json;

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw ParameterError("config field '" + field + "': " + what);
}

template <class T>
T get_uint(const json& v, const std::string& field, uint64_t max) {
  if (!v.is_number_unsigned()) field_error(field, "expected a non-negative integer");
  uint64_t x = v.get<uint64_t>();
  if (x > max) field_error(field, "must be at most " + std::to_string(max));
  return static_cast<T>(x);
}

std::string get_string(const json& v, const std::string& field) {
  if (!v.is_string()) field_error(field, "expected a string");
  return v.get<std::string>();
}

template <class F>
auto wrap(const std::string& field, F&& f) {
  try {
    return f();
  } catch (const ParameterError& e) {
    field_error(field, e.what());
  } catch (const DecodeError& e) {
    field_error(field, e.what());
  }
}

}  // namespace

Seed parse_seed(std::string_view hex) {
  if (hex.size() > 64 || hex.size() % 2 != 0) throw ParameterError("seed must be an even number of hex digits, at most 64");
  Bytes b;
  try {
    b = from_hex(hex);
  } catch (const DecodeError&) {
    throw ParameterError("seed is not hexadecimal");
  }
  Seed s{};
  std::copy(b.begin(), b.end(), s.begin());
  return s;
}

std::pair<std::string, uint16_t> parse_address(std::string_view addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string_view::npos || colon == 0) throw ParameterError("address must be host:port");
  std::string host(addr.substr(0, colon));
  std::string port(addr.substr(colon + 1));
  unsigned long p = 0;
  try {
    size_t used = 0;
    p = std::stoul(port, &used);
    if (used != port.size()) throw std::invalid_argument("port");
  } catch (const std::exception&) {
    throw ParameterError("bad port '" + port + "'");
  }
  if (p > 65535) throw ParameterError("port out of range");
  return {host, static_cast<uint16_t>(p)};
}

Config parse_config_json(const std::string& text, Config c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParameterError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParameterError("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "group") {
      c.group = get_string(v, k);
    } else if (k == "functionality") {
      c.functionality = wrap(k, [&] { return functionality_from_name(get_string(v, k)); });
    } else if (k == "mode") {
      c.mode = wrap(k, [&] { return security_mode_from_name(get_string(v, k)); });
    } else if (k == "n") {
      c.n = get_uint<unsigned>(v, k, 1000);
    } else if (k == "symbols") {
      if (!v.is_array()) field_error(k, "expected an array of strings");
      c.symbols.clear();
      for (const auto& s : v) c.symbols.push_back(get_string(s, k));
    } else if (k == "symbols_file") {
      c.symbols_file = get_string(v, k);
    } else if (k == "seed") {
      c.seed = wrap(k, [&] { return parse_seed(get_string(v, k)); });
    } else if (k == "auction") {
      c.auction = get_uint<uint64_t>(v, k, ~uint64_t{0});
    } else if (k == "listen") {
      c.listen = get_string(v, k);
      wrap(k, [&] { return parse_address(c.listen); });
    } else if (k == "connect") {
      c.connect = get_string(v, k);
      wrap(k, [&] { return parse_address(c.connect); });
    } else if (k == "id") {
      c.id = get_uint<PartyId>(v, k, 0xffffffffu);
    } else if (k == "timeout_ms") {
      c.timeout = std::chrono::milliseconds(get_uint<uint64_t>(v, k, 86400000));
    } else if (k == "registration_window_ms") {
      c.registration_window = std::chrono::milliseconds(get_uint<uint64_t>(v, k, 86400000));
    } else if (k == "expected_clients") {
      c.expected_clients = get_uint<size_t>(v, k, 1u << 20);
    } else if (k == "psk") {
      c.psk = wrap(k, [&] { return from_hex(get_string(v, k)); });
    } else if (k == "metrics_port") {
      c.metrics_port = get_uint<uint16_t>(v, k, 65535);
    } else if (k == "rounds") {
      c.rounds = get_uint<unsigned>(v, k, 1u << 20);
    } else if (k == "interval_ms") {
      c.interval = std::chrono::milliseconds(get_uint<uint64_t>(v, k, 86400000));
    } else if (k == "max_frame") {
      c.max_frame = get_uint<size_t>(v, k, 1u << 28);
    } else {
      field_error(k, "unknown field");
    }
  }
  return c;
}

Config load_config_file(const std::string& path, Config base) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_json(ss.str(), std::move(base));
}

void validate_config(const Config& c) {
  if (c.group != "ristretto255") field_error("group", "only ristretto255 is supported");
  if (c.n < 1 || c.n > 63 || ((c.n + 1) & c.n) != 0)
    field_error("n", "must be of the form 2^m - 1 and below 64 (got " + std::to_string(c.n) + ")");
  if (!comparison_bound_holds(c.n)) field_error("n", "comparison bound fails for this width");
  if (c.functionality == Functionality::RangeClientToClient && c.mode == SecurityMode::Malicious)
    field_error("mode", "range-c2c runs only in semi-honest mode");
  if (c.id == kServerId) field_error("id", "0 is the server's id");
  if (c.timeout.count() == 0) field_error("timeout_ms", "must be positive");
  if (c.rounds == 0) field_error("rounds", "must be positive");
  if (c.max_frame < 4096) field_error("max_frame", "must be at least 4096");
  wrap("listen", [&] { return parse_address(c.listen); });
  wrap("connect", [&] { return parse_address(c.connect); });
}

AuctionParams auction_params(const Config& c) {
  validate_config(c);
  AuctionParams p;
  p.functionality = c.functionality;
  p.mode = c.mode;
  p.n = c.n;
  p.auction = c.auction;
  if (c.seed) p.seed = *c.seed;
  if (!c.symbols_file.empty()) {
    std::ifstream in(c.symbols_file);
    if (!in) field_error("symbols_file", "cannot open '" + c.symbols_file + "'");
    p.universe = wrap("symbols_file", [&] { return SymbolUniverse::parse(in); });
  } else {
    p.universe = wrap("symbols", [&] { return SymbolUniverse(c.symbols); });
  }
  validate_params(p);
  return p;
}

}  // namespace primematch
