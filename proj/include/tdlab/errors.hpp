#pragma once

#include <stdexcept>
#include <string>

namespace tdlab {

/// Input violates a documented precondition (bad shape, out-of-range parameter,
/// invalid MRP). Callers at the CLI boundary map this to a config error.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// A linear system that must be nonsingular is not (smallest pivot or singular
/// value below the fixed 1e-10 threshold).
class SingularSystem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical routine failed to produce a result (eigen-solver failure, inner
/// iteration cap reached, reducible chain).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tdlab

namespace tdlab {

/// Experiment configuration is malformed; the message names the field.
class ConfigError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// Output could not be written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tdlab
