#pragma once

#include <stdexcept>
#include <string>

namespace exk {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed user input (domain, model file, CLI flags).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A request exceeds what an algorithm supports (dimension caps, model kind).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: singular matrices, non-finite integrands, inconsistent models.
class NumericError : public Error {
 public:
  using Error::Error;
};

class DegenerateModelError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ModelInconsistencyError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// A point handed to a face parameterization lies outside the open face.
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace exk
