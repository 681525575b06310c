#pragma once

#include <stdexcept>
#include <string>

namespace primematch {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or non-canonical bytes.
class DecodeError : public Error {
 public:
  using Error::Error;
};

// Value outside the range an operation accepts (e.g. v >= 2^n).
class RangeError : public Error {
 public:
  using Error::Error;
};

// Caller violated a precondition, e.g. asked a prover to prove a false
// statement or mixed ciphertexts under different keys.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Invalid public parameters (bit width, list length, config values).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Connection closed, timed out, or refused.
class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace primematch
