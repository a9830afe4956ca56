// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace acstep {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration value is out of its allowed domain.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller violated a documented precondition (shape, range, ordering).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A computation produced or consumed a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An object was used in a state that does not permit the call.
class StateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Inputs are individually well formed but mutually inconsistent.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace acstep
