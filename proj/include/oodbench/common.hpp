#pragma once

#include <stdexcept>
#include <string>

namespace oodbench {

inline constexpr const char* kVersion = "0.1.0";

/// Invalid configuration or argument contract violation. CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Missing or malformed data on disk. CLI exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure such as training divergence. CLI exit code 4.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace oodbench
