#pragma once

#include <stdexcept>
#include <string>

namespace pdppo {

/// Input vector or matrix has the wrong dimension.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Operation called on an object that is not in the required state.
class StateError : public std::logic_error {
 public:
  explicit StateError(const std::string& what) : std::logic_error(what) {}
};

/// Environment phase called out of order.
class PhaseError : public StateError {
 public:
  explicit PhaseError(const std::string& what) : StateError(what) {}
};

class InvalidActionError : public std::invalid_argument {
 public:
  explicit InvalidActionError(const std::string& what)
      : std::invalid_argument(what) {}
};

/// Bad or inconsistent configuration (maps to CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pdppo
