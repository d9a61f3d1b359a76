#pragma once

#include <stdexcept>
#include <string>

namespace sdsr {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied something that violates a precondition (dimensions,
/// non-finite values, inconsistent configuration, manifest violations).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A solver could not proceed: non-SPD system, degenerate Lipschitz estimate.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (image headers, model containers, CSV).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures, always carrying the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sdsr
