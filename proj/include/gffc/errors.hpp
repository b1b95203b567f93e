#pragma once
#include <stdexcept>
#include <string>

namespace gffc {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConstraintError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gffc
