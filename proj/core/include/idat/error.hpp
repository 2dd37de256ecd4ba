#pragma once

#include <stdexcept>
#include <string>

namespace idat {

// Error taxonomy shared by the whole library. The CLI maps user-facing
// errors (config, usage, data, file) to exit code 2 and runtime numeric
// failures to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or dimension mismatch between tensors.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value (bad variant name, nonpositive temperature, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// API misuse (backward called twice, empty dataset, double injection, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Bad data content (label out of range, zero-norm row, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable file.
class LoadError : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced by a forward operation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Broken internal invariant (missing gradient on a trainable parameter, ...).
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace idat
