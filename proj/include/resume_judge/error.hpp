#pragma once

#include <stdexcept>
#include <string>

namespace resume_judge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// An id or key was not found.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// A sample specification cannot be satisfied by the available pools.
class InfeasibleSpecError : public Error {
 public:
  InfeasibleSpecError(std::string pool, const std::string& message)
      : Error(message), pool_(std::move(pool)) {}

  const std::string& pool() const noexcept { return pool_; }

 private:
  std::string pool_;
};

/// Transport-level failure talking to a model endpoint (after retries).
class EndpointError : public Error {
 public:
  using Error::Error;
};

/// A judge response could not be turned into a verdict.
class ParseError : public Error {
 public:
  ParseError(std::string field, const std::string& message, std::string raw)
      : Error(message), field_(std::move(field)), raw_(std::move(raw)) {}

  /// Name of the offending field, or "block" when no answer block was found.
  const std::string& field() const noexcept { return field_; }
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string field_;
  std::string raw_;
};

/// A pipeline stage was invoked before the stage it depends on.
class MissingStageError : public Error {
 public:
  MissingStageError(std::string required, const std::string& message)
      : Error(message), required_(std::move(required)) {}

  const std::string& required_stage() const noexcept { return required_; }

 private:
  std::string required_;
};

/// The run directory holds files the manifest does not account for, or a
/// recorded artifact is missing.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// An artifact on disk no longer matches the digest recorded in the manifest.
class StaleArtifactError : public Error {
 public:
  using Error::Error;
};

}  // namespace resume_judge
