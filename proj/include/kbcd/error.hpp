#pragma once

#include <stdexcept>
#include <string>

namespace kbcd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cholesky hit a non-positive pivot. The caller owns regularization.
class NotSpd : public Error {
 public:
  using Error::Error;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A block update increased the objective past tolerance.
class Divergence : public Error {
 public:
  using Error::Error;
};

class InvalidRate : public Error {
 public:
  using Error::Error;
};

class CombinatorialBlowup : public Error {
 public:
  using Error::Error;
};

class NotPerfectSquare : public Error {
 public:
  using Error::Error;
};

/// Supplied feature count is below what the concentration lemma requires.
class ThresholdNotMet : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace kbcd
