// error.hpp: exception types shared by the passk library and CLI.
#pragma once

#include <stdexcept>
#include <string>

namespace passk {

/// Thrown when an operation's preconditions are violated (bad counts, k out of
/// range, malformed batches, domain errors).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown by the CLI layer when a run config fails schema validation.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput(what);
}

}  // namespace detail
}  // namespace passk
