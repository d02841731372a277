#pragma once

#include <stdexcept>
#include <string>

namespace flexhdr {

// Thrown for invalid run configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error("config: " + msg) {}
};

// Thrown for unreadable or inconsistent input data (CLI exit code 3).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error("data: " + msg) {}
};

// Thrown when a computation produces non-finite values (CLI exit code 4).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error("numeric: " + msg) {}
};

}  // namespace flexhdr
