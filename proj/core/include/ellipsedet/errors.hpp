#pragma once

#include <stdexcept>
#include <string>

namespace ellipsedet {

/// Bad parameters supplied by a caller (maps to CLI exit code 1).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Missing, unreadable or malformed data on disk (exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss or a diverging optimisation (exit code 3).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ellipsedet
