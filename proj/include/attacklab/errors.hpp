#pragma once

#include <stdexcept>
#include <string>

namespace attacklab {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct DetachedLoss : Error {
  using Error::Error;
};
struct DuplicateEdge : Error {
  using Error::Error;
};
struct InvalidIndex : Error {
  using Error::Error;
};
struct InsufficientCandidates : Error {
  using Error::Error;
};
struct IsolatedUser : Error {
  using Error::Error;
};
struct InvalidParams : Error {
  using Error::Error;
};
struct InconsistentCounts : Error {
  using Error::Error;
};
struct EmptyMask : Error {
  using Error::Error;
};
struct IllegalAction : Error {
  using Error::Error;
};
struct TooManyActions : Error {
  using Error::Error;
};
struct EmptyTargets : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

/// Parse failure with the 1-based line number of the offending line.
struct ParseError : Error {
  ParseError(int line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line(line) {}
  int line;
};

}  // namespace attacklab
