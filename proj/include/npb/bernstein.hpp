#pragma once

#include <span>
#include <vector>

namespace npb {

/// Bernstein polynomial basis of order M on [lower, upper].
///
/// Inputs are optionally log-transformed before rescaling to the unit
/// interval. Outside [lower, upper] the basis is extended linearly from the
/// nearest boundary, so any monotone transform built on it stays monotone
/// (and finite) on the whole real line.
class BernsteinBasis {
 public:
  BernsteinBasis(int order, double lower, double upper, bool log_scale = false);

  int order() const noexcept { return order_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(order_) + 1; }
  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }
  bool log_scale() const noexcept { return log_scale_; }

  /// Maps v to the working scale (log v when log_scale). Throws for v <= 0 on the log scale.
  double to_working_scale(double v) const;

  /// Basis values (b_0(v), ..., b_M(v)).
  std::vector<double> evaluate(double v) const;
  void evaluate(double v, std::span<double> out) const;

  /// d/dv of each basis function, including the 1/(u-l) and (log scale) 1/v factors.
  std::vector<double> derivative(double v) const;
  void derivative(double v, std::span<double> out) const;

 private:
  void unit_basis(double s, int degree, std::span<double> out) const;

  int order_;
  double lower_;
  double upper_;
  bool log_scale_;
};

/// h(v) = b(v)' theta with nondecreasing coefficients.
class MonotoneTransform {
 public:
  MonotoneTransform(BernsteinBasis basis, std::vector<double> coefficients);

  const BernsteinBasis& basis() const noexcept { return basis_; }
  const std::vector<double>& coefficients() const noexcept { return coefficients_; }

  double operator()(double v) const;
  double derivative(double v) const;

  /// Smallest v with h(v) >= target, by bisection on the working scale.
  /// The linear tails make the range of h the whole real line unless h is flat there.
  double inverse(double target) const;

 private:
  BernsteinBasis basis_;
  std::vector<double> coefficients_;
};

/// Coefficients of the identity-like transform mapping [lower,upper] (working scale)
/// affinely onto [from, to].
std::vector<double> linear_coefficients(const BernsteinBasis& basis, double from, double to);

}  // namespace npb
