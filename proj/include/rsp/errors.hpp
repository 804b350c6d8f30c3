#pragma once

#include <stdexcept>
#include <string>

namespace rsp {

/// Bad user-supplied parameters (filling, grid sizes, probabilities).
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of a formula (self-coupling,
/// non-positive lengths, index collisions).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Any failure of a numerical routine: step-size violations, instabilities,
/// eigensolver non-convergence, integrator underflow.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StepSizeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InstabilityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double residual)
      : NumericalError(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// A pairing that cannot be replayed as a non-crossing decimation sequence.
class PairingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The slowest sweep of a bond-breaking scan did not reach the target
/// ground-state overlap.
class BaselineError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Least-squares fit requested on too few points or too narrow a range.
class FitRangeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DependencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, written or parsed; the message names the file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rsp
