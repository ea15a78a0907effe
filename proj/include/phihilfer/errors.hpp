#pragma once

#include <stdexcept>
#include <string>

namespace phihilfer {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on a numeric parameter was violated.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A function was evaluated outside of its domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A result is not representable as a finite double.
class OverflowError : public Error {
 public:
  using Error::Error;
};

/// Expression text could not be parsed.
class SyntaxError : public Error {
 public:
  SyntaxError(std::string message, std::size_t position)
      : Error(message + " at position " + std::to_string(position)),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Expression evaluation failed (missing binding, domain violation).
class EvalError : public Error {
 public:
  using Error::Error;
};

/// The kernel function or another input failed sampling validation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Picard iteration did not reach the requested tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& message, double last_residual, int iterations)
      : Error(message), last_residual_(last_residual), iterations_(iterations) {}

  double last_residual() const noexcept { return last_residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double last_residual_;
  int iterations_;
};

/// A stated hypothesis (e.g. the lambda_theta condition) does not hold.
class HypothesisError : public Error {
 public:
  using Error::Error;
};

/// Config document is malformed or inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace phihilfer
