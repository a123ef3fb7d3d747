#pragma once

#include <stdexcept>
#include <string>

namespace arr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, flags or preconditions supplied by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (CSV rows, checkpoints, vocabularies).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity appeared where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace arr
