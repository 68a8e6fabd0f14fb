#pragma once

#include <stdexcept>
#include <string>

namespace lrptext {

// Base class for every error the library raises. The CLI maps the concrete
// subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or missing configuration, unknown class names, invalid arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or missing input data (dataset layout, vector files, checkpoints).
class DataError : public Error {
 public:
  using Error::Error;
};

// Divergence, zero variance and other numeric failures.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace lrptext
