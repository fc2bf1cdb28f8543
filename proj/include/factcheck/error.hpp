#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace factcheck {

// Error categories map onto process exit codes:
//   validation/parse/io/computation -> 1, provider/retrieval/verification -> 2,
//   internal -> 3 (success is 0).
enum class ErrorKind {
  validation,
  parse,
  io,
  computation,
  provider,
  retrieval,
  verification,
  internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  int exit_code() const {
    switch (kind_) {
      case ErrorKind::validation:
      case ErrorKind::parse:
      case ErrorKind::io:
      case ErrorKind::computation:
        return 1;
      case ErrorKind::provider:
      case ErrorKind::retrieval:
      case ErrorKind::verification:
        return 2;
      case ErrorKind::internal:
        return 3;
    }
    return 3;
  }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error(ErrorKind::validation, message) {}
};

// Malformed file content; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line = 0)
      : Error(ErrorKind::parse,
              line ? message + " (line " + std::to_string(line) + ")" : message),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorKind::io, message) {}
};

class ComputationError : public Error {
 public:
  explicit ComputationError(const std::string& message)
      : Error(ErrorKind::computation, message) {}
};

// Remote backend failure; carries the provider/backend id for diagnostics.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& provider_id, const std::string& message)
      : Error(ErrorKind::provider, "provider '" + provider_id + "': " + message),
        provider_id_(provider_id) {}

  const std::string& provider_id() const { return provider_id_; }

 private:
  std::string provider_id_;
};

class RetrievalError : public Error {
 public:
  explicit RetrievalError(const std::string& message)
      : Error(ErrorKind::retrieval, message) {}
};

class VerificationError : public Error {
 public:
  explicit VerificationError(const std::string& message)
      : Error(ErrorKind::verification, message) {}
};

}  // namespace factcheck
