#pragma once

#include <stdexcept>
#include <string>

namespace veq {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Evaluation left the domain of a coefficient function (pole, negative
/// base under a fractional power, non-finite value).
struct DomainError : Error {
  using Error::Error;
};

/// Adaptive quadrature hit its panel budget without meeting the tolerance.
struct QuadratureError : Error {
  using Error::Error;
};

/// k(a) vanishes (or is not finite), so the twist k(x)/k(a) does not exist.
struct MissingTwistError : Error {
  using Error::Error;
};

struct DepthCapError : Error {
  using Error::Error;
};

struct UnassignedUnknownError : Error {
  using Error::Error;
};

/// Malformed problem source. Line and column are 1-based; 0 means unknown.
struct ParseError : Error {
  ParseError(const std::string& msg, int line, int col)
      : Error(line > 0 ? std::to_string(line) + ":" + std::to_string(col) + ": " + msg : msg),
        line(line),
        col(col) {}
  int line;
  int col;
};

struct UndeclaredSymbolError : ParseError {
  using ParseError::ParseError;
};

struct MixedLowerLimitError : ParseError {
  using ParseError::ParseError;
};

struct NonSeparableKernelError : ParseError {
  using ParseError::ParseError;
};

}  // namespace veq
