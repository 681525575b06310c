#include "primematch/abort.h"

#include <array>

namespace primematch {

namespace {

constexpr std::array<std::string_view, 17> kNames = {
    "None",           "CommitmentMismatch", "OpeningInvalid",         "ComEqInvalid",
    "BitProofInvalid", "ServerRecommitMismatch", "OneManyInvalid",    "RevealInvalid",
    "CoinTossInvalid", "HandshakeFailed",    "ChannelAuthFailed",      "ReplayDetected",
    "MalformedMessage", "BothBitsFalse",     "PeerAborted",            "Timeout",
    "RouteError",
};

std::string message_for(AbortReason reason, uint64_t session, const std::string& detail) {
  std::string m = "session " + std::to_string(session) + " aborted: " + std::string(abort_reason_name(reason));
  if (!detail.empty()) m += " (" + detail + ")";
  return m;
}

}  // namespace

std::string_view abort_reason_name(AbortReason r) {
  auto i = static_cast<size_t>(r);
  return i < kNames.size() ? kNames[i] : "Unknown";
}

AbortReason abort_reason_from_name(std::string_view name) {
  for (size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return static_cast<AbortReason>(i);
  return AbortReason::None;
}

ProtocolAbort::ProtocolAbort(AbortReason reason, uint64_t session, const std::string& detail)
    : Error(message_for(reason, session, detail)), reason_(reason), session_(session) {}

}  // namespace primematch
