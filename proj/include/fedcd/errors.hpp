#pragma once

#include <stdexcept>
#include <string>

namespace fedcd {

// Thrown when a matrix or vector argument violates a shape precondition.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when a factorization cannot be completed even after regularization.
class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when an optimizer produces a non-finite parameter or gradient.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int client_id, long step)
      : std::runtime_error(what), client_id(client_id), step(step) {}
  int client_id;
  long step;
};

// Thrown on malformed frames, version mismatches, or broken connections.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when a configuration file is malformed or fails validation.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fedcd
