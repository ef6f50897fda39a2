#pragma once

#include <stdexcept>
#include <string>

namespace tacthand {

/// Invalid configuration or argument value.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Image or tensor dimensions do not agree with what an operation needs.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Image pipeline stage mismatch (raw vs processed).
class StageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a caller breaks a sequencing contract, e.g. requesting a new
/// actuator increment before the previous one has settled.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace tacthand
