#pragma once

// Independent reference computations used by the tests: adaptive Gauss-Kronrod
// quadrature of the bivariate normal density (no shared code with the library's
// closed forms beyond the univariate normal CDF).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

inline double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double Phi(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Phi(b) - Phi(a) from the tail the interval lies in, so that the integrands
// below keep relative accuracy (otherwise adaptive refinement never settles).
inline double Phi_interval(double a, double b) {
  if (a > 0.0) return 0.5 * (std::erfc(a / std::numbers::sqrt2) - std::erfc(b / std::numbers::sqrt2));
  return Phi(b) - Phi(a);
}

inline double gk(const auto& f, double a, double b) {
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12, &err);
}

// Integral of f over [a, b] split at the given interior points.
inline double gk_split(const auto& f, double a, double b, std::vector<double> cuts) {
  std::vector<double> pts{a};
  std::sort(cuts.begin(), cuts.end());
  for (double c : cuts)
    if (c > a && c < b && std::isfinite(c)) pts.push_back(c);
  pts.push_back(b);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) s += gk(f, pts[i], pts[i + 1]);
  return s;
}

// P(a1 < Z1 <= b1, a2 < Z2 <= b2) as a 1-D integral over z1 of phi(z1) times the
// conditional probability of the second coordinate; cut where the conditional
// probability changes fastest.
inline double rectangle(double a1, double b1, double a2, double b2, double rho) {
  const double s = std::sqrt(1.0 - rho * rho);
  auto cond = [&](double z) {
    return phi(z) * Phi_interval((a2 - rho * z) / s, (b2 - rho * z) / s);
  };
  std::vector<double> cuts;
  if (rho != 0.0) {
    if (std::isfinite(a2)) cuts.push_back(a2 / rho);
    if (std::isfinite(b2)) cuts.push_back(b2 / rho);
  }
  cuts.push_back(0.0);
  return gk_split(cond, std::max(a1, -40.0), std::min(b1, 40.0), cuts);
}

inline double bvn_cdf(double z1, double z2, double rho) {
  return rectangle(-std::numeric_limits<double>::infinity(), z1, -std::numeric_limits<double>::infinity(), z2, rho);
}

inline double bvn_pdf(double z1, double z2, double rho) {
  const double s2 = 1.0 - rho * rho;
  return std::exp(-(z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) / (2.0 * s2)) / (2.0 * std::numbers::pi * std::sqrt(s2));
}

// Integral over s in [a, b] of phi_rho(z, s).
inline double strip(double z, double a, double b, double rho) {
  auto f = [&](double s) { return bvn_pdf(z, s, rho); };
  return gk_split(f, std::max(a, -40.0), std::min(b, 40.0), {rho * z});
}

}  // namespace oracle
