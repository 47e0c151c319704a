#pragma once

#include <stdexcept>
#include <string>

namespace modulus {

/// Base class for every error raised by the library. Each subclass maps to
/// one failure domain so callers (the CLI in particular) can translate it
/// into an exit status without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor extents.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced or consumed by a kernel, layer or optimizer.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameter or argument value.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary input (IDX, CIFAR, checkpoint).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Semantically invalid data, e.g. a label outside the class range.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Model description that cannot be built.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Rank-sum test on a sample with zero pooled variance.
class DegenerateSampleError : public Error {
 public:
  using Error::Error;
};

/// Result set that cannot be turned into a report (ragged cells etc).
class ReportError : public Error {
 public:
  using Error::Error;
};

}  // namespace modulus
