#pragma once

#include <stdexcept>
#include <string>

namespace ezgzl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or dimensions of the operands disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented invariant or a configuration constraint.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A file does not conform to its binary or text format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A computation produced a non-finite value.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace ezgzl
