#pragma once

#include <stdexcept>
#include <string>

namespace gnas {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments (bad field, out-of-range value).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A well-formed request whose inputs cannot be processed
/// (non-finite values, shape mismatch, empty data, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable input files.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace gnas
