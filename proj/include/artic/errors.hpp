#pragma once

#include <stdexcept>
#include <string>

namespace artic {

// Bad configuration (CLI exit code 1).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Bad or inconsistent input data (CLI exit code 2).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Degenerate geometry (zero-velocity metric sample, revolute twist with
// vanishing angular part, ...).
struct DegeneracyError : std::runtime_error {
  explicit DegeneracyError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace artic
