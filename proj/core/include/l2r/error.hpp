#pragma once

#include <stdexcept>
#include <string>

namespace l2r {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes or lengths disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Operation needs a tensor of higher rank.
class RankError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an operation precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Input value outside the mathematical domain (non-finite coordinate, empty set, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Text input could not be parsed. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Structured input is missing a required column or field.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Binary input has an invalid layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace l2r
