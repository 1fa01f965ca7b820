#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gridsens {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent dimensions or violated model invariants.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Malformed input files or measurement data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Measurement stream that changes shape mid-run.
class StreamError : public Error {
 public:
  using Error::Error;
};

/// Divergence, non-finite values or a failed factorization.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, std::ptrdiff_t iteration = -1)
      : Error(what), iteration_(iteration) {}

  /// Iteration at which the failure was detected, or -1 if not iterative.
  std::ptrdiff_t iteration() const noexcept { return iteration_; }

 private:
  std::ptrdiff_t iteration_;
};

}  // namespace gridsens
