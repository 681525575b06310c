#pragma once

// Operator configuration: a JSON file, overridable by flags and
// PRIMEMATCH_* environment variables (see README).

#include <chrono>
#include <string>
#include <vector>

#include "primematch/engine.h"

namespace primematch {

struct Config {
  std::string group = "ristretto255";
  Functionality functionality = Functionality::MultiClient;
  SecurityMode mode = SecurityMode::Malicious;
  unsigned n = 31;
  std::vector<std::string> symbols;
  std::string symbols_file;
  std::optional<Seed> seed;
  uint64_t auction = 1;
  std::string listen = "127.0.0.1:7400";
  std::string connect = "127.0.0.1:7400";
  PartyId id = 1;
  std::chrono::milliseconds timeout{30000};
  std::chrono::milliseconds registration_window{60000};
  size_t expected_clients = 2;
  Bytes psk;
  uint16_t metrics_port = 0;
  unsigned rounds = 1;
  std::chrono::milliseconds interval{0};
  size_t max_frame = kDefaultMaxFrame;
};

// Applies the keys present in a JSON object on top of `base`. Errors name the
// offending field: "config field 'n': ...".
Config parse_config_json(const std::string& text, Config base = {});
Config load_config_file(const std::string& path, Config base = {});
void validate_config(const Config& c);

// Up to 64 hex digits, left-aligned into the 32-byte seed.
Seed parse_seed(std::string_view hex);
std::pair<std::string, uint16_t> parse_address(std::string_view addr);

// Universe from the symbol list or file, plus validated auction parameters.
AuctionParams auction_params(const Config& c);

}  // namespace primematch
