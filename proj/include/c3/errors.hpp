#pragma once

#include <stdexcept>
#include <string>

namespace c3 {

// Bad arguments: out-of-vocab tokens, empty inputs, violated preconditions.
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ProtocolError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Two different context strings mapped to the same key. Not recoverable.
struct FatalCollision : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The evaluator budget ledger did not balance.
struct BudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace c3
