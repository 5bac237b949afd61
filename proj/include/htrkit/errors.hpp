#pragma once

#include <stdexcept>
#include <string>

namespace htrkit {

// Bad input values, malformed files, violated preconditions.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing files, unreadable or unwritable paths, codec failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace htrkit
