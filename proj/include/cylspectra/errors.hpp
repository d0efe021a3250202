#pragma once

#include <stdexcept>
#include <string>

namespace cylspectra {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent or out-of-range configuration (mesh specs, families, config files).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Vector or grid sizes that do not match the mesh they are used with.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Exponent outside the supported range p >= 2.
class UnsupportedExponentError : public Error {
 public:
  using Error::Error;
};

/// A function that is not admissible for the requested boundary conditions.
class AdmissibilityError : public Error {
 public:
  using Error::Error;
};

/// Rayleigh quotient of the zero field.
class UndefinedQuotientError : public Error {
 public:
  using Error::Error;
};

/// Precondition on a field (e.g. sign) is violated.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Breakdown inside a linear or eigen solver.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// File-system failure while reading inputs or writing artifacts.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cylspectra
