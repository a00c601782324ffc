#pragma once

#include <stdexcept>
#include <string>

namespace rrnet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Power iteration ran out of its sweep budget before the tolerance was met.
class NonConverged : public Error {
 public:
  using Error::Error;
};

/// A closed-form quantity was requested outside the region where it is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// f(x) == 0, a vanishing gradient, a zero vector, or a dead layer.
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed network file: bad magic, unsupported version, bad shape, or truncation.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration. `key()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& message)
      : Error("config key '" + key + "': " + message), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace rrnet
