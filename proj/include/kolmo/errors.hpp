#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace kolmo {

/// Structural or coefficient assumption violated by a model. `clause()` is a
/// stable machine-readable identifier (e.g. "m_monotonicity", "zero_block").
class ValidationError : public std::invalid_argument {
 public:
  ValidationError(std::string clause, const std::string& what)
      : std::invalid_argument(what), clause_(std::move(clause)) {}

  const std::string& clause() const noexcept { return clause_; }

 private:
  std::string clause_;
};

/// Malformed input document (JSON syntax, missing or mistyped fields).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation that could not produce a trustworthy result: singular
/// Gramian, quadrature that failed to converge, non-positive diffusion hit
/// during simulation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kolmo
