#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace idnmf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller misuse: shape mismatch, rank out of range, bad configuration.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Input data outside the admissible domain (negative, non-finite, all zero).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition on the arguments does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A cell with positive data meets a zero model value, so a ratio
/// data/model is undefined.
class SingularityError : public Error {
 public:
  SingularityError(std::size_t row, std::size_t col)
      : Error("singular cell (" + std::to_string(row) + ", " + std::to_string(col) +
              "): positive data but zero model value"),
        row_(row),
        col_(col) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

/// A factor or latent component carries no mass and cannot be normalized.
class DegenerateError : public Error {
 public:
  DegenerateError(const std::string& what, std::size_t component)
      : Error(what + " (component " + std::to_string(component) + ")"), component_(component) {}

  std::size_t component() const noexcept { return component_; }

 private:
  std::size_t component_;
};

}  // namespace idnmf
