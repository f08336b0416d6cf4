#pragma once

#include <stdexcept>
#include <string>

namespace cpl {

/// Bad configuration or unknown name; maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed malformed or non-finite input.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Math domain violation inside a primitive (division by zero, sqrt of a negative).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Query outside a tabulated or physical range.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Operation exists but is not supported in the requested mode.
class UnimplementedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Numerical abort during training or solving (ill-posed targets, NaN, blow-up);
/// maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cpl
