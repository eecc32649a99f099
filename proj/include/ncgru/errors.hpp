#pragma once

#include <stdexcept>
#include <string>

namespace ncgru {

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct RangeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Violated precondition that is not a shape problem (empty sequence, wrong cell variant, ...).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

struct SingularityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Power iteration ran out of iterations; the last estimate is kept.
struct ConvergenceError : std::runtime_error {
  ConvergenceError(const std::string& what, double last_estimate)
      : std::runtime_error(what), last_estimate(last_estimate) {}
  double last_estimate;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace ncgru
