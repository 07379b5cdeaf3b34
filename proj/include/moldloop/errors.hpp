#pragma once

#include <stdexcept>
#include <string>

namespace moldloop {

// Base of the toolkit's error hierarchy. Each subclass maps to one failure
// mode named in a module contract, so callers can catch precisely.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Argument or parameter outside its declared range.
class RangeError : public Error {
 public:
  using Error::Error;
};

// Array/matrix dimensions inconsistent with the declared structure.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A size bound (e.g. full-factorial run count) exceeded.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced where the model promises finite output.
class NumericalFault : public Error {
 public:
  using Error::Error;
};

// A measurement plan that cannot fit its window. Carries the overflow.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& msg, double overflow_s)
      : Error(msg), overflow_s(overflow_s) {}
  double overflow_s;
};

// Statistical inference impossible on the given data (degenerate inputs,
// no error degrees of freedom, ...).
class InferenceError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, int epoch) : Error(msg), epoch(epoch) {}
  int epoch;
};

// Operation called on a network of the wrong recurrence kind.
class ModeError : public Error {
 public:
  using Error::Error;
};

// Object not in the state the operation requires (e.g. untrained net).
class StateError : public Error {
 public:
  using Error::Error;
};

// Configuration file problems: parse errors, unknown keys, missing seed.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace moldloop
