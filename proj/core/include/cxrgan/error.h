// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace cxrgan {

// Exceptions are grouped by what the caller can do about them; the CLI maps
// each family onto a distinct exit code.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor dimensions do not agree with what an op requires.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// An operation that is not available on the requested differentiation path.
class UnsupportedOpError : public Error {
 public:
  UnsupportedOpError(const std::string& op, const std::string& reason)
      : Error("unsupported operation '" + op + "': " + reason), op_(op) {}
  const std::string& op() const { return op_; }

 private:
  std::string op_;
};

// Malformed input files, unknown labels, missing images, bad corpora.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite losses or gradients, undefined statistics.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace cxrgan
