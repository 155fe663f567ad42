#pragma once

#include <stdexcept>
#include <string>

namespace pfm {

// Base for every error raised by the library. Callers that only need a
// message can catch std::runtime_error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input outside an operation's domain (non-positive counts, bad shapes...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Tube geometry cannot carry the requested number of guided modes.
class InfeasibleGeometry : public Error {
 public:
  using Error::Error;
};

// Split-step refused to advance: per-step nonlinear phase too large or the
// field went non-finite.
class StabilityError : public Error {
 public:
  using Error::Error;
};

// Adjoint checkpoint storage would exceed the configured memory budget.
class BudgetError : public Error {
 public:
  BudgetError(const std::string& what, std::size_t required_bytes)
      : Error(what), required_bytes_(required_bytes) {}
  std::size_t required_bytes() const { return required_bytes_; }

 private:
  std::size_t required_bytes_;
};

// Malformed or corrupt file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace pfm
