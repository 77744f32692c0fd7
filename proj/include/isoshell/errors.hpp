#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace isoshell {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input: config schema, mesh file, expression syntax,
/// out-of-range options. Maps to CLI exit code 2.
struct ValidationError : Error {
  using Error::Error;
};

/// Expression syntax error with the byte offset of the failure and the
/// tokens that would have been accepted there.
struct ParseError : ValidationError {
  ParseError(size_t offset, std::string expected, std::string detail = {})
      : ValidationError("parse error at offset " + std::to_string(offset) + ": " +
                        (detail.empty() ? "expected " + expected : detail)),
        offset(offset),
        expected(std::move(expected)) {}

  size_t offset;
  std::string expected;
};

/// Expression evaluation failure (division by zero, 0^negative, ...).
struct EvalError : Error {
  using Error::Error;
};

/// Numerical diagnostic: an analysis ran but its result violates an
/// asserted property (incompatible corrector, cycle-closure failure,
/// sweep cap, PDE type change). Maps to CLI exit code 3.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace isoshell
