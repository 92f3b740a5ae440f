#pragma once

#include <stdexcept>
#include <string>

namespace semcom {

// Bad or inconsistent configuration (missing paths, invalid sizes, bad keys).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data (shape mismatches, out-of-range label ids).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API used in a state where it is not allowed (e.g. training-only heads at inference).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A documented precondition on a value was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace semcom

namespace semcom {

// Training produced a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace semcom
