#pragma once

#include <stdexcept>
#include <string>

namespace tabfuse {

/// Bad user-supplied arguments or configuration (CLI exit code 2).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Unreadable or schema-violating input files (CLI exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A required upstream artifact (checkpoint, probability dump) is absent
/// (CLI exit code 4).
class MissingInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape or contract violation inside the tensor engine.
class ShapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Numerical failure during optimization (non-finite loss or gradient).
class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tabfuse
