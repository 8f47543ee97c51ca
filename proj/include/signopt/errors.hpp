#pragma once

#include <stdexcept>
#include <string>

namespace signopt {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

// Raised by a metered oracle once its query budget is spent. Attack loops
// catch it and report their best-so-far result.
struct BudgetExhausted : Error {
  BudgetExhausted() : Error("query budget exhausted") {}
};

struct ParseError : Error {
  using Error::Error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct PreconditionError : Error {
  using Error::Error;
};

// No candidate direction reaches an adversarial region; the attack cannot start.
struct InitializationError : Error {
  using Error::Error;
};

}  // namespace signopt
