#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evreg {

// Invalid argument to a distribution or special function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed formula text; offset is the byte position of the offending token.
class SyntaxError : public std::invalid_argument {
 public:
  SyntaxError(const std::string& what, std::size_t offset)
      : std::invalid_argument(what + " at offset " + std::to_string(offset)),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Formula or dataset inconsistencies (missing columns, bad values, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The likelihood cannot be evaluated at the requested parameter point.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A matrix that must be invertible (or positive definite) is not.
class ConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A statistic was requested for a model outside its supported class.
class UnsupportedModel : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The full and restricted fits contradict each other (l_hat < l_tilde).
class InconsistentFits : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace evreg
