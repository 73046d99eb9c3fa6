#pragma once

#include <stdexcept>
#include <string>

namespace gcm {

// Shape disagreement between operands or parameters.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an op (e.g. log of a non-positive value).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Caller broke an API precondition (backward on a non-scalar, step after done, ...).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// A forward op produced NaN/Inf from finite inputs.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration: malformed prior, missing metadata, unknown config keys.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gcm
