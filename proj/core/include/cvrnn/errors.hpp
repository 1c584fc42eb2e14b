// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace cvrnn {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model, loss or training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes or vector lengths that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation precondition (wrong clip length, empty series).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Missing, empty or undecodable dataset content.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; carries the 1-based line number.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, int line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// A metric that is undefined for the given input (e.g. AUC with one class).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint file that is truncated, corrupt, or of an unknown version.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace cvrnn
