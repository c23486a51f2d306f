#pragma once

#include <stdexcept>
#include <string>

namespace npb {

/// Input data or configuration does not satisfy the documented schema.
class SchemaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A probability, density or denominator degenerated (zero mass, -inf log-likelihood).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optimisation failure or an unusable optimum.
class FitError : public std::runtime_error {
 public:
  enum class Kind { non_convergence, singular_hessian };

  FitError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace npb
