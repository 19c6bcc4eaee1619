#pragma once

#include <stdexcept>
#include <string>

namespace khectl {

// Argument outside the mathematical domain of an operation (non-invertible
// element, Legendre symbol of a multiple of p, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Safe-prime search exhausted its attempt budget.
class GenerationTimeout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A quantized magnitude does not fit the group (encode side) or a decoded
// magnitude is implausibly large (decode side).
class OverflowError : public std::overflow_error {
 public:
  using std::overflow_error::overflow_error;
};

// Malformed configuration, key file or wire message.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace khectl
