#pragma once

#include <stdexcept>
#include <string>

namespace cogrl {

// Base of every error the library throws. Each subclass maps to its own CLI
// exit code (see cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or layer extents that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid architecture, hyperparameter or precondition on a configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (files, ids, logs).
class InputError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced during a forward pass or training.
class NumericError : public Error {
 public:
  using Error::Error;
};

// AFM optimisation failure (non-finite objective).
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace cogrl
