#pragma once

#include <stdexcept>
#include <string>

namespace repdyn {

/// Malformed or inconsistent input data (files, manifests, labels).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied arguments that violate an operation's preconditions.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace repdyn
