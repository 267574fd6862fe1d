// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace fsa {

// Every error raised by the toolkit derives from Error so callers that only
// care about "something went wrong in a run" can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A caller passed a value outside an operation's domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// An object is not in the state an operation requires (e.g. missing grads).
class StateError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf reached a tensor.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Checkpoint contents disagree with the requested architecture.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Dataset does not satisfy an experiment's requirements.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace fsa
