#pragma once

#include <stdexcept>
#include <string>

namespace mfl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed schema text, unresolved names, unguarded recursion, uninhabited
/// types reaching the compiler.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A runtime datum does not fit the type or operation it was handed to.
class ValueError : public Error {
 public:
  using Error::Error;
};

/// Dimension or shape disagreement between tensors, yectors, or graph nodes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or a numerical check over tolerance.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace mfl
