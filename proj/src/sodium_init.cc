#include "primematch/sodium_init.h"

#include <sodium.h>

#include <mutex>

#include "primematch/errors.h"

namespace primematch {

void ensure_sodium() {
  static std::once_flag once;
  static bool ok = false;
  std::call_once(once, [] { ok = sodium_init() >= 0; });
  if (!ok) throw Error("libsodium initialization failed");
}

}  // namespace primematch
