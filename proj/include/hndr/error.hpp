#pragma once

#include <stdexcept>
#include <string>

namespace hndr {

/// Bad input: malformed files, unknown IDs, invalid configuration. Maps to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite losses or objectives during optimization. Maps to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hndr
