#pragma once

#include <stdexcept>
#include <string>

namespace tsrisk {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed case or configuration document.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A structurally valid document that violates a model invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Non-convergence, singular matrices, degenerate sequence data.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Dynamic initialization produced a controller reference outside its limits.
class InitializationError : public Error {
 public:
  using Error::Error;
};

/// Bad run configuration or argument combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace tsrisk
