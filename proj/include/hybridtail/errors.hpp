#pragma once

#include <stdexcept>
#include <string>

namespace hybridtail {

// Model parameters or preconditions outside the supported regime.
class RegimeError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Request exceeds a documented capacity cap (grid sizes, matrix orders).
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Asymptotic machinery invoked below its range of validity.
class RangeError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hybridtail
