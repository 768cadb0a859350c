#pragma once

#include <stdexcept>

namespace vpe {

// Malformed configuration or command usage. CLI exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable or ill-formed datasets and on-disk artifacts. CLI exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A computation produced or received non-finite values. CLI exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vpe
