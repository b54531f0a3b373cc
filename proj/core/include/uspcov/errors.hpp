#pragma once

#include <stdexcept>
#include <string>

namespace uspcov {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Mismatched vector/matrix dimensions between arguments.
class DimensionError : public Error {
  using Error::Error;
};

/// A matrix expected to be symmetric positive definite failed its symmetry
/// tolerance or its Cholesky factorization.
class NotPositiveDefiniteError : public Error {
  using Error::Error;
};

/// The regression design is rank deficient.
class SingularDesignError : public Error {
  using Error::Error;
};

/// An argument is outside its documented domain.
class DomainError : public Error {
  using Error::Error;
};

/// A chain is constant (or otherwise unusable) for diagnostics.
class DegenerateChainError : public Error {
  using Error::Error;
};

/// Numeric failure inside a running chain or evaluation; the message carries
/// the iteration or simulation index.
class ChainError : public Error {
  using Error::Error;
};

/// Invalid run configuration or CLI usage.
class ConfigError : public Error {
  using Error::Error;
};

/// Malformed input file; the message carries the offending line or record.
class ParseError : public ConfigError {
  using ConfigError::ConfigError;
};

}  // namespace uspcov
