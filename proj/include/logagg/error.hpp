#pragma once

#include <stdexcept>
#include <string>

namespace logagg {

// Bad input or configuration. The CLI maps this to exit code 1.
class validation_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical failure while fitting or sampling. The CLI maps this to exit code 2.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace logagg
