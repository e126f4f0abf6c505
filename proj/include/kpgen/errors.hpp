#pragma once

#include <stdexcept>
#include <string>

namespace kpgen {

// Inconsistent dimensions or hyperparameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A call made outside its precondition (empty input, wrong kind of tensor...).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf produced, or a probability that underflowed to zero.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kpgen
