#pragma once

#include <stdexcept>

namespace statorguard {

/// Raised for violated preconditions on user-facing inputs.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace statorguard
