#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gfom {

// Malformed or inconsistent configuration (shapes, keys, missing tables).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value violates a documented invariant (negative variance, bad index).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterate left the finite range. Carries the offending step so callers
// can report divergence as an outcome rather than a crash.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : NumericalError(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace gfom
