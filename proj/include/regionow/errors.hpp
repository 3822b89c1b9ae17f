#pragma once

#include <stdexcept>
#include <string>

namespace regionow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A requested index or year lies outside the valid timeline.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// An input value is outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration / preconditions on inputs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Matrix or vector shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or failed factorizations.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A contiguous time series has a gap.
class ContiguityError : public Error {
 public:
  using Error::Error;
};

/// Duplicate keys in a table that must be unique.
class UniquenessError : public Error {
 public:
  using Error::Error;
};

/// A key (country, region) was not found.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// Malformed delimited input. Carries file and line context.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

}  // namespace regionow
