#pragma once

namespace npb {

/// Standard bivariate normal CDF P(Z1 <= z1, Z2 <= z2) with correlation rho.
/// Arguments may be +-inf; |rho| <= 1.
double bvn_cdf(double z1, double z2, double rho);

/// Upper orthant P(Z1 > z1, Z2 > z2).
double bvn_upper(double z1, double z2, double rho);

/// Bivariate standard normal density; requires |rho| < 1.
double bvn_pdf(double z1, double z2, double rho);
double bvn_log_pdf(double z1, double z2, double rho);

struct ConditionalNormal {
  double mean;
  double sd;
};

/// Distribution of Z1 given Z2 = z_given.
ConditionalNormal conditional_normal(double z_given, double rho);

/// Integral over s in [a, b] of the bivariate density at (z_fixed, s).
double strip_probability(double z_fixed, double a, double b, double rho);

/// P(a1 < Z1 <= b1, a2 < Z2 <= b2). Narrow rectangles are integrated directly
/// (Gauss-Legendre over the narrow side) to keep relative accuracy.
double rectangle_probability(double a1, double b1, double a2, double b2, double rho);

}  // namespace npb
