// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace hproto {

// Bad input values or arguments. The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a vector's L2 norm is below kDegenerateNorm.
class DegenerateVectorError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Unreadable, corrupt or unwritable files. The CLI maps these to exit code 2.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hproto
