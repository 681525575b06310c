#pragma once

// Runs one pair session (or one bank session) over an in-process network
// with a thread per party and collects what each party returned or aborted
// with.

#include <array>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "primematch/mpc.h"

namespace harness {

using namespace primematch;

struct PartyResult {
  std::optional<AbortReason> abort;
  std::string detail;
};

struct PairRun {
  std::vector<ServerOutcome> server;
  std::array<std::vector<ClientOutcome>, 2> clients;
  std::array<PartyResult, 3> parties;  // server, client 0, client 1
  std::vector<RelayRecord> records;

  bool clean() const {
    for (const auto& p : parties)
      if (p.abort) return false;
    return true;
  }
};

struct PairOptions {
  SecurityMode mode = SecurityMode::Malicious;
  unsigned n = 8;
  std::chrono::milliseconds timeout{20000};
  std::array<ClientTamper, 2> tamper{};
  ServerTamper server_tamper{};
  Router::Adversary adversary;
  uint8_t seed = 1;
};

template <class F>
void capture(PartyResult& r, F&& body) {
  try {
    body();
  } catch (const ProtocolAbort& a) {
    r.abort = a.reason();
    r.detail = a.what();
  }
}

inline Seed tagged_seed(uint8_t a, uint8_t b) {
  Seed s{};
  s[0] = a;
  s[1] = b;
  return s;
}

inline PairRun run_pair(const std::vector<std::pair<uint64_t, uint64_t>>& values, const PairOptions& opt = {}) {
  constexpr PartyId kA = 1, kB = 2;
  constexpr uint64_t kSession = 7, kAuction = 1;
  LocalNetwork net;
  net.router().set_recording(true);
  if (opt.adversary) net.router().set_adversary(opt.adversary);
  auto server_ep = net.connect(kServerId);
  std::array<std::shared_ptr<Endpoint>, 2> client_ep{net.connect(kA), net.connect(kB)};

  ChaChaStream setup(tagged_seed(opt.seed, 0xee));
  const auto& params = PedersenParams::standard();
  std::vector<InstanceSpec> specs;
  std::array<std::vector<ClientInput>, 2> inputs;
  for (size_t k = 0; k < values.size(); ++k) {
    ClientInput a{values[k].first, Scalar::random(setup)};
    ClientInput b{values[k].second, Scalar::random(setup)};
    specs.push_back(InstanceSpec{"S" + std::to_string(k) + "/buy",
                                 params.commit(Scalar::from_u64(a.value), a.randomness),
                                 params.commit(Scalar::from_u64(b.value), b.randomness)});
    inputs[0].push_back(a);
    inputs[1].push_back(b);
  }
  ProtocolConfig cfg;
  cfg.n = opt.n;
  cfg.timeout = opt.timeout;

  PairRun run;
  std::array<std::thread, 2> threads;
  for (int i = 0; i < 2; ++i) {
    threads[i] = std::thread([&, i] {
      ChaChaStream rng(tagged_seed(opt.seed, static_cast<uint8_t>(i + 1)));
      capture(run.parties[i + 1], [&] {
        auto start = await_pair_start(*client_ep[i], opt.timeout);
        if (!start) return;
        run.clients[i] = pair_session_client(*client_ep[i], kAuction, *start, inputs[i], cfg, rng, opt.tamper[i]);
      });
    });
  }
  ChaChaStream rng(tagged_seed(opt.seed, 0));
  capture(run.parties[0], [&] {
    run.server = pair_session_server(*server_ep, kSession, kAuction, kA, kB, opt.mode, specs, cfg, rng,
                                     opt.server_tamper);
  });
  for (auto& t : threads) t.join();
  run.records = net.router().records();
  return run;
}

struct B2CRun {
  std::vector<B2COutcome> bank;
  std::vector<B2COutcome> client;
  std::array<PartyResult, 2> parties;  // bank, client
  std::vector<RelayRecord> records;
};

inline B2CRun run_b2c(const std::vector<std::pair<uint64_t, uint64_t>>& values, unsigned n = 8,
                      const B2CTamper& tamper = {}, uint8_t seed = 1) {
  constexpr PartyId kClient = 5;
  LocalNetwork net;
  net.router().set_recording(true);
  auto bank_ep = net.connect(kServerId);
  auto client_ep = net.connect(kClient);
  ChaChaStream setup(tagged_seed(seed, 0xbb));
  auto keys = ElGamalKeypair::generate(setup);
  std::vector<std::string> labels;
  std::vector<B2CBankInput> bank_inputs;
  std::vector<uint64_t> client_values;
  for (size_t k = 0; k < values.size(); ++k) {
    labels.push_back("S" + std::to_string(k));
    bank_inputs.push_back(B2CBankInput{values[k].first, Scalar::random(setup)});
    client_values.push_back(values[k].second);
  }
  ProtocolConfig cfg;
  cfg.n = n;
  cfg.timeout = std::chrono::milliseconds(20000);

  B2CRun run;
  std::thread client([&] {
    ChaChaStream rng(tagged_seed(seed, 2));
    capture(run.parties[1], [&] {
      auto start = await_pair_start(*client_ep, cfg.timeout);
      if (!start) return;
      run.client = b2c_client(*client_ep, 1, *start, client_values, cfg, rng, tamper);
    });
  });
  ChaChaStream rng(tagged_seed(seed, 1));
  capture(run.parties[0], [&] {
    run.bank = b2c_bank(*bank_ep, 9, 1, kClient, keys, labels, bank_inputs, cfg, rng, tamper);
  });
  client.join();
  run.records = net.router().records();
  return run;
}

}  // namespace harness
