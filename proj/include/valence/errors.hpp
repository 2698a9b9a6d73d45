#pragma once

#include <stdexcept>
#include <string>

namespace valence {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor/vector shape or dimension mismatch.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(what) {}
};

/// Violated precondition of an operation (empty input, bad range, ...).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(what) {}
};

/// Malformed input files, schema violations, missing paths. Exit code 2.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what) {}
};

/// Training diverged (non-finite loss or gradient). Exit code 3.
class TrainError : public Error {
 public:
  explicit TrainError(const std::string& what) : Error(what) {}
};

/// Bad command-line usage. Exit code 1.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(what) {}
};

}  // namespace valence
