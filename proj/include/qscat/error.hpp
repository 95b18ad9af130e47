#pragma once

#include <stdexcept>
#include <string>

namespace qscat {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operands with incompatible Hilbert-space dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An input violates a physical precondition (non-Hermitian operator,
/// non-positive width, uncertainty violation, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A numerical quality gate failed: closed channel, step-size underflow,
/// quadrature non-convergence, defects above threshold.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incomplete experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace qscat
