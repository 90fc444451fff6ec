#pragma once

#include <stdexcept>
#include <string>

namespace irncc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A patch whose dispersion is below the degeneracy threshold (flat patch).
class DegeneratePatchError : public Error {
 public:
  using Error::Error;
};

/// A pixel sits on the signum discontinuity of the MAD normalization.
class KinkProximityError : public Error {
 public:
  using Error::Error;
};

class SizeMismatchError : public Error {
 public:
  using Error::Error;
};

class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable input file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace irncc
