#pragma once

#include <stdexcept>

namespace textnorm {

// Bad config file or bad flag combination. CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API misuse: wrong call sequence, non-scalar loss, duplicate parameter
// names. CLI maps this to exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data: parse errors, truncated files,
// checkpoint/vocabulary mismatches. CLI maps this to exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A sentence (or batch) with no usable content where at least one unit
// is required.
struct EmptySourceError : DataError {
  using DataError::DataError;
};

// Tensor shape mismatch.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf reached a place it must never be. CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace textnorm
