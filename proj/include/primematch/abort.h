#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "primematch/errors.h"

namespace primematch {

// The check that failed when a session aborts.
enum class AbortReason : uint8_t {
  None = 0,
  CommitmentMismatch,      // registered commitment differs from the party's own
  OpeningInvalid,          // share-half opening does not match its commitment
  ComEqInvalid,            // commitment equality proof rejected
  BitProofInvalid,         // bit proof rejected
  ServerRecommitMismatch,  // server-side Com(d; s) differs from the commitment run
  OneManyInvalid,          // one-out-of-many proof rejected
  RevealInvalid,           // revealed minimum fails its proof or opening
  CoinTossInvalid,         // coin-toss opening does not match its commitment
  HandshakeFailed,         // secure-channel handshake did not authenticate
  ChannelAuthFailed,       // sealed payload failed authentication
  ReplayDetected,          // envelope sequence number did not increase
  MalformedMessage,        // undecodable or unexpected message
  BothBitsFalse,           // comparison produced no winner
  PeerAborted,             // counterpart reported an abort
  Timeout,                 // no message within the configured timeout
  RouteError,              // relay could not deliver
};

std::string_view abort_reason_name(AbortReason r);
AbortReason abort_reason_from_name(std::string_view name);

class ProtocolAbort : public Error {
 public:
  ProtocolAbort(AbortReason reason, uint64_t session, const std::string& detail = {});

  AbortReason reason() const { return reason_; }
  uint64_t session() const { return session_; }

 private:
  AbortReason reason_;
  uint64_t session_;
};

}  // namespace primematch
