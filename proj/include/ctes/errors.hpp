#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ctes {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad hyperparameters, incompatible layer shapes,
/// violated structural rules such as k > 2h.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input of the wrong shape or content for an operation.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A non-finite loss or gradient appeared while training.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::size_t iteration, const std::string& what)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// Every characteristic in the data is identical, so no mismatched pair exists.
class MismatchImpossible : public Error {
 public:
  using Error::Error;
};

class EnsembleError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

/// A ratio metric whose denominator is empty.
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

/// Malformed model or data file. `offset` is the byte position when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset = 0)
      : Error(what), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class VersionMismatch : public ParseError {
 public:
  using ParseError::ParseError;
};

}  // namespace ctes
