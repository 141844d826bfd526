#pragma once

#include <stdexcept>
#include <string>

namespace meshnet {

// Base for every error the library raises. Callers that only care about
// "something in the input was wrong" can catch this; the CLI maps it to a
// data/validation exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed OBJ/PLY/eseg/checkpoint content. `line()` is 1-based, 0 when the
// error is not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Mesh connectivity violates the manifold / winding / degeneracy contract.
class TopologyError : public Error {
 public:
  using Error::Error;
};

// Tensor shapes disagree, or an operation produced NaN/Inf.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Bad configuration key or value (unknown keys are errors).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dataset content problems: missing labels, label/edge count mismatch,
// labels out of range, pooling exhaustion.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace meshnet
