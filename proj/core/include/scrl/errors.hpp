#pragma once

#include <stdexcept>
#include <string>

namespace scrl {

// Base of the error taxonomy. Subclasses map onto CLI exit codes:
// config 2, data 3, numeric 4 (see tools/).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file header or unsupported version.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Payload shorter than the header declares.
class TruncationError : public Error {
 public:
  using Error::Error;
};

// Value outside its documented domain (NaN/Inf, coord out of range, ...).
class ValueError : public Error {
 public:
  using Error::Error;
};

// Incompatible shapes between operands or between files of one dataset.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Cross-file schema violation inside a dataset directory.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Lookup of an id that does not exist.
class KeyError : public Error {
 public:
  using Error::Error;
};

// Requested more samples than the candidate set can supply.
class BudgetError : public Error {
 public:
  using Error::Error;
};

// Operation called on an object in the wrong lifecycle state.
class StateError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced where the math guarantees finiteness.
class NumericError : public Error {
 public:
  using Error::Error;
};

// I/O failure while reading or writing an artifact.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace scrl
