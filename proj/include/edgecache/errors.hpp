#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace edgecache {

/// Base class for all recoverable errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be opened or a required input is missing.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Malformed CSV/JSON content. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Requests that reference contents with no metadata record.
class JoinError : public Error {
 public:
  JoinError(const std::string& what, std::vector<long long> missing)
      : Error(what), missing_(std::move(missing)) {}

  const std::vector<long long>& missing_ids() const noexcept { return missing_; }

 private:
  std::vector<long long> missing_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values produced during learning or prediction.
class NumericError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

}  // namespace edgecache
