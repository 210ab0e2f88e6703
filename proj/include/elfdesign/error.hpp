#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace elfdesign {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text. `position()` is the 0-based character offset.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Evaluation outside the domain of an operation (log of a non-positive value,
/// division by zero, nonpositive variance, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid user input: config fields, design vectors, option values.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// The target vector c is not in the range of the information matrix.
class NotEstimableError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed to produce an answer (LP infeasible, no fit).
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace elfdesign
