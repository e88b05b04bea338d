#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace shotvalue {

// Base for every error raised by the library. The C API maps each subclass
// onto one sv_status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed input text. line is 1-based; 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Singular systems, non-finite objectives, failed factorizations.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Geometric preconditions on a trajectory that cannot be met (no bounce,
// no net crossing, no root in range).
class GeometryError : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

}  // namespace shotvalue
