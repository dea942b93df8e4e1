#pragma once

#include <stdexcept>
#include <string>

namespace paultrap {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid input: a violated invariant, bad configuration value, or malformed file.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Configuration text that cannot be parsed. Carries the 1-based location.
class ParseError : public ValidationError {
public:
  ParseError(const std::string &what, int line, int column)
      : ValidationError(what + " (line " + std::to_string(line) + ", column " +
                        std::to_string(column) + ")"),
        line_(line), column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

private:
  int line_;
  int column_;
};

/// Failure during a simulation or analysis stage.
class SimulationError : public Error {
public:
  using Error::Error;
};

/// Mathieu parameters outside the first stability region, or no confining minimum.
class UnstableParameters : public SimulationError {
public:
  using SimulationError::SimulationError;
};

/// Position outside the modeled quadrupole region.
class OutOfRegion : public SimulationError {
public:
  using SimulationError::SimulationError;
};

/// Integrator instability sentinel (an ion exceeded the speed limit).
class BlowUp : public SimulationError {
public:
  using SimulationError::SimulationError;
};

/// A least-squares fit with no usable information.
class DegenerateFit : public SimulationError {
public:
  using SimulationError::SimulationError;
};

/// The untickled control cloud lost too many ions.
class ControlRunFailure : public SimulationError {
public:
  using SimulationError::SimulationError;
};

/// Replay requested against a configuration whose digest changed.
class DigestMismatch : public ValidationError {
public:
  using ValidationError::ValidationError;
};

} // namespace paultrap
