#pragma once

// Timed in-process auctions over K synthetic symbols, with traffic broken
// down by protocol phase.

#include <string>
#include <vector>

#include "primematch/engine.h"

namespace primematch {

// Phase a message type belongs to: control, handshake, channel (sealed
// client-to-client traffic), shares, verdict, reveal, b2c.
std::string_view phase_of(MsgType t);

struct BenchPhase {
  std::string name;
  uint64_t envelopes = 0;
  uint64_t client_bytes = 0;  // framed bytes sent by clients
  uint64_t server_bytes = 0;  // framed bytes sent by the server itself
};

struct BenchReport {
  size_t symbols = 0;
  Functionality functionality = Functionality::ClientToClient;
  SecurityMode mode = SecurityMode::Malicious;
  unsigned n = 31;
  double seconds = 0;
  uint64_t matches = 0;
  uint64_t bytes_total = 0;
  std::vector<BenchPhase> phases;

  double throughput() const { return seconds > 0 ? static_cast<double>(symbols) / seconds : 0; }
  double bytes_per_symbol() const { return symbols ? static_cast<double>(bytes_total) / symbols : 0; }
  std::string to_json() const;
};

// Two clients on opposite sides of every symbol (the bank against one client
// for bank functionalities), random amounts below 2^n drawn from `seed`.
BenchReport run_bench(Functionality f, SecurityMode mode, unsigned n, size_t symbols, const Seed& seed);

}  // namespace primematch
