#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dialsynth {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document. `location` is a JSON path or "line N".
class ParseError : public Error {
 public:
  ParseError(std::string location, const std::string& what)
      : Error(location.empty() ? what : location + ": " + what),
        location_(std::move(location)) {}
  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  ValidationError(std::string location, const std::string& what)
      : Error(location.empty() ? what : location + ": " + what),
        location_(std::move(location)) {}
  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

/// A sampling constraint could not be met for the current draw; the caller
/// is expected to resample with a fresh sub-seed.
class ConstraintError : public Error {
 public:
  using Error::Error;
};

/// Structure synthesis exhausted its resampling budget; the schema is too
/// small for the requested category or intent pair.
class ResampleExhausted : public Error {
 public:
  using Error::Error;
};

/// Transport or protocol failure talking to an LLM / embedding backend.
class BackendError : public Error {
 public:
  using Error::Error;
};

/// Remote backend selected without credentials in the environment.
class CredentialError : public Error {
 public:
  using Error::Error;
};

}  // namespace dialsynth
