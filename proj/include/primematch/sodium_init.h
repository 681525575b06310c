#pragma once

namespace primematch {

// Idempotent, thread-safe libsodium initialization. Throws if the library
// cannot be initialized.
void ensure_sodium();

}  // namespace primematch
