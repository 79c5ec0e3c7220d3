#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tstereo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numeric argument outside the domain of the operation (e.g. d <= 0 in a
/// depth conversion, a point behind the camera).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent shapes, out-of-range parameters or unknown configuration keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content. Carries the location of the offending byte or line.
class ParseError : public Error {
 public:
  ParseError(std::string file, std::string location, const std::string& what)
      : Error(file + ":" + location + ": " + what),
        file_(std::move(file)),
        location_(std::move(location)) {}

  const std::string& file() const noexcept { return file_; }
  const std::string& location() const noexcept { return location_; }

 private:
  std::string file_;
  std::string location_;
};

/// File system failures (missing files, unwritable outputs).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Raised by completion when the semi-dense hint has no valid pixel.
class EmptyHintError : public Error {
 public:
  using Error::Error;
};

/// Raised by loss evaluators when no pixel contributes.
class UndefinedLossError : public Error {
 public:
  using Error::Error;
};

}  // namespace tstereo
