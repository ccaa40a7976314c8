#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace driftls {

// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A documented precondition was violated by the caller.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// A rank-1 update or similar step hit a vanishing denominator.
class NumericalDegeneracy : public Error {
 public:
  using Error::Error;
};

// Factorization failed: the matrix is not (numerically) positive definite.
class SingularMatrix : public Error {
 public:
  using Error::Error;
};

// The quantity exists only once enough data has been seen.
class NotReady : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed record in a line-oriented file; line numbers are 1-based.
class SchemaError : public Error {
 public:
  SchemaError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace driftls
