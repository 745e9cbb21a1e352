// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace adalrs {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed a value outside an operation's domain.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration. `key()` names the offending config key.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(key + ": " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Operation invoked in the wrong controller phase.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Training left the stable region (non-finite or exploding loss).
class DivergedError : public Error {
 public:
  DivergedError(const std::string& what, long long step)
      : Error(what), step_(step) {}

  long long step() const noexcept { return step_; }

 private:
  long long step_;
};

/// A search exhausted its domain without a qualifying answer.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace adalrs
