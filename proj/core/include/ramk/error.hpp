#pragma once

#include <stdexcept>
#include <string>

namespace ramk {

// Base of every error thrown by the library. The CLI maps subclasses onto
// stable exit codes (see ErrorKind).
enum class ErrorKind {
  kConfig,      // bad flags, bad parameters, incompatible artifacts
  kData,        // missing or malformed input files
  kInternal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

/// Raised when codebook, index and features disagree on mode or provenance.
class CompatibilityError : public Error {
 public:
  explicit CompatibilityError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class CorruptIndexError : public Error {
 public:
  explicit CorruptIndexError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

const char* to_string(ErrorKind kind) noexcept;

}  // namespace ramk
