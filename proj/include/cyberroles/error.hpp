#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cyberroles {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A standoff label or data file that does not follow its grammar.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input data that is well-formed but violates a domain invariant
/// (duplicate post ids, inconsistent harm/role pairs, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied argument outside the operation's domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Models, ensembles or training settings that cannot work together.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Text that cannot be turned into a feature vector.
class EncodingError : public Error {
 public:
  using Error::Error;
};

class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(std::size_t step, double loss)
      : Error("training diverged at step " + std::to_string(step) +
              " (loss " + std::to_string(loss) + ")"),
        step_(step) {}

  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace cyberroles
