// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace laln {

// Base class for every error raised by the library. The CLI maps each
// subclass to a distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform to an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation (log of 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Caller violated an API precondition (non-scalar loss, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid distribution or hyper-parameter (tau <= 0, alpha <= 0, K > T, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data.
class InputError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration document or value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, divergence, or degenerate weights.
class NumericError : public Error {
 public:
  using Error::Error;
};

// File system failures; the message always carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace laln
