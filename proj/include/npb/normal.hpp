#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace npb {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Standard normal density.
inline double norm_pdf(double z) {
  if (std::isinf(z)) return 0.0;
  return std::exp(-0.5 * z * z) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

inline double norm_log_pdf(double z) {
  return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi);
}

/// Standard normal CDF, accurate in the lower tail.
inline double norm_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

/// 1 - Phi(z), accurate in the upper tail.
inline double norm_cdf_upper(double z) {
  return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

/// Phi(b) - Phi(a) for a <= b, evaluated on whichever tail keeps precision.
inline double norm_interval(double a, double b) {
  if (a > 0.0) return norm_cdf_upper(a) - norm_cdf_upper(b);
  return norm_cdf(b) - norm_cdf(a);
}

/// Inverse standard normal CDF. Returns -inf / +inf at 0 / 1.
inline double norm_quantile(double p) {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  if (p > 0.5) return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * (1.0 - p));
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

/// z such that 1 - Phi(z) = q, accurate for small q.
inline double norm_quantile_upper(double q) {
  if (q <= 0.0) return kInf;
  if (q >= 1.0) return -kInf;
  if (q > 0.5) return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * (1.0 - q));
  return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
}

}  // namespace npb
