#pragma once

#include <stdexcept>
#include <string>

namespace katokit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A point violates the chart constraint of its model.
class InvalidPoint : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation (t <= 0, r <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class UnsupportedModel : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  using Error::Error;
};

class EmptyWindow : public Error {
 public:
  using Error::Error;
};

// A linear-algebra backend reported failure.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

// Raised when a truncated series cannot meet the requested tolerance.
// The attained bound travels with the exception.
class TruncationError : public Error {
 public:
  TruncationError(const std::string& what, double bound) : Error(what), bound_(bound) {}
  double bound() const noexcept { return bound_; }

 private:
  double bound_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, int column)
      : Error(what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
        line_(line),
        column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace katokit
