#pragma once

#include <stdexcept>
#include <string>

namespace cdecf {

/// Bad configuration or unusable input files (CLI exit code 2).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Data ingestion / persistence failures (CLI exit code 1).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values, divergence, shape mismatches (CLI exit code 1).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cdecf
