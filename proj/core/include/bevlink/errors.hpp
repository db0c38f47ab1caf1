#pragma once

#include <stdexcept>
#include <string>

namespace bevlink {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A tensor, grid or symbol block has the wrong shape for the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input cannot be processed because it carries no energy/information
/// (e.g. an all-zero block handed to power normalization).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// An argument is outside its documented domain.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Configuration document failed validation. `key()` names the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Dataset ingestion failure (missing directory, table, or malformed file).
class IngestionError : public Error {
 public:
  using Error::Error;
};

/// A training stage was requested without the checkpoint it builds on.
class PrerequisiteError : public Error {
 public:
  using Error::Error;
};

/// Recognized option whose implementation is intentionally absent.
class UnimplementedError : public Error {
 public:
  using Error::Error;
};

}  // namespace bevlink
