#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace meu {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model, factor or strategy violates a structural invariant.
class InvalidModelError : public Error {
 public:
  using Error::Error;
};

/// Two operands disagree about a variable (cardinality, membership).
class ScopeError : public Error {
 public:
  using Error::Error;
};

/// A conditioning slice is identically zero and cannot be normalized.
class DegenerateSliceError : public Error {
 public:
  using Error::Error;
};

/// A message division hit x / 0 with x > 0.
class NumericalSupportError : public Error {
 public:
  using Error::Error;
};

/// A table or enumeration would exceed a configured size cap.
class ResourceCapError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. Carries the 1-based line and token position.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t token)
      : Error(what + " (line " + std::to_string(line) + ", token " +
              std::to_string(token) + ")"),
        line_(line),
        token_(token) {}

  std::size_t line() const { return line_; }
  std::size_t token() const { return token_; }

 private:
  std::size_t line_;
  std::size_t token_;
};

}  // namespace meu
