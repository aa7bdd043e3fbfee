#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ndmd {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Shape or argument misuse.
struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

/// Basis or system too ill-conditioned for a reliable solve.
struct IllConditionedError : Error {
  double condition;
  IllConditionedError(const std::string& msg, double cond)
    : Error(msg + " (condition estimate " + std::to_string(cond) + ")"), condition(cond) {}
};

/// Non-finite values appeared; `index` names the step, layer, or mode.
struct DivergenceError : Error {
  long index;
  DivergenceError(const std::string& msg, long idx)
    : Error(msg + " (at index " + std::to_string(idx) + ")"), index(idx) {}
};

/// An iterative method ran out of its iteration budget.
struct NonConvergenceError : Error {
  explicit NonConvergenceError(const std::string& msg) : Error(msg) {}
};

/// Malformed or truncated file; `offset` is the byte position of the problem.
struct IoError : Error {
  std::uint64_t offset;
  IoError(const std::string& msg, std::uint64_t off)
    : Error(msg + " (offset " + std::to_string(off) + ")"), offset(off) {}
};

}  // namespace ndmd
