#include "npb/bvn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "npb/normal.hpp"

namespace npb {
namespace {

// Gauss-Legendre rules on [-1,1]; only the negative half of the nodes is kept.
struct HalfRule {
  std::vector<double> x;
  std::vector<double> w;
};

HalfRule gauss_legendre_half(int n) {
  HalfRule rule;
  for (int i = 1; i <= n / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i - 0.25) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0;
      double p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z_old = z;
      z = z_old - p1 / pp;
      if (std::abs(z - z_old) < 1e-16) break;
    }
    rule.x.push_back(-z);
    rule.w.push_back(2.0 / ((1.0 - z * z) * pp * pp));
  }
  return rule;
}

const std::array<HalfRule, 3>& rules() {
  static const std::array<HalfRule, 3> r{gauss_legendre_half(6), gauss_legendre_half(12),
                                         gauss_legendre_half(20)};
  return r;
}

void check_rho(double rho) {
  if (std::isnan(rho)) throw std::invalid_argument("correlation is NaN");
  if (std::abs(rho) > 1.0) throw std::invalid_argument("correlation outside [-1, 1]");
}

// Upper orthant probability for finite h, k (Genz's refinement of the
// Drezner-Wesolowsky method: Gauss-Legendre in asin(r) for moderate |r|,
// an asymptotic expansion plus correction integral for |r| close to 1).
double upper_orthant_finite(double h, double k, double r) {
  const HalfRule& rule = std::abs(r) < 0.3 ? rules()[0] : (std::abs(r) < 0.75 ? rules()[1] : rules()[2]);
  const std::size_t lg = rule.x.size();
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double hk = h * k;
  double bvn = 0.0;

  if (std::abs(r) < 0.925) {
    const double hs = 0.5 * (h * h + k * k);
    const double asr = std::asin(r);
    for (std::size_t i = 0; i < lg; ++i) {
      double sn = std::sin(asr * (rule.x[i] + 1.0) * 0.5);
      bvn += rule.w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      sn = std::sin(asr * (-rule.x[i] + 1.0) * 0.5);
      bvn += rule.w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
    return bvn * asr / (2.0 * two_pi) + norm_cdf_upper(h) * norm_cdf_upper(k);
  }

  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (std::abs(r) < 1.0) {
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    bvn = a * std::exp(-(bs / as + hk) * 0.5) *
          (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    if (hk > -160.0) {
      const double b = std::sqrt(bs);
      bvn -= std::exp(-hk * 0.5) * std::sqrt(two_pi) * norm_cdf(-b / a) * b *
             (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a *= 0.5;
    for (std::size_t i = 0; i < lg; ++i) {
      for (const double sign : {-1.0, 1.0}) {
        const double xs = std::pow(a * (sign * rule.x[i] + 1.0), 2);
        const double rs = std::sqrt(1.0 - xs);
        const double asr = -(bs / xs + hk) * 0.5;
        if (asr > -100.0) {
          bvn += a * rule.w[i] * std::exp(asr) *
                 (std::exp(-hk * xs / (2.0 * (1.0 + rs) * (1.0 + rs))) / rs -
                  (1.0 + c * xs * (1.0 + d * xs)));
        }
      }
    }
    bvn = -bvn / two_pi;
  }
  if (r > 0.0) return bvn + norm_cdf_upper(std::max(h, k));
  bvn = -bvn;
  if (k > h) {
    if (h < 0.0)
      bvn += norm_cdf(k) - norm_cdf(h);
    else
      bvn += norm_cdf_upper(h) - norm_cdf_upper(k);
  }
  return bvn;
}

}  // namespace

double bvn_upper(double z1, double z2, double rho) {
  if (std::isnan(z1) || std::isnan(z2)) throw std::invalid_argument("bvn argument is NaN");
  check_rho(rho);
  if (z1 == kInf || z2 == kInf) return 0.0;
  if (z1 == -kInf) return norm_cdf_upper(z2);
  if (z2 == -kInf) return norm_cdf_upper(z1);
  return std::clamp(upper_orthant_finite(z1, z2, rho), 0.0, 1.0);
}

double bvn_cdf(double z1, double z2, double rho) {
  if (std::isnan(z1) || std::isnan(z2)) throw std::invalid_argument("bvn argument is NaN");
  return bvn_upper(-z1, -z2, rho);
}

double bvn_log_pdf(double z1, double z2, double rho) {
  check_rho(rho);
  if (std::abs(rho) >= 1.0) throw std::invalid_argument("bivariate density is degenerate at |rho| = 1");
  if (std::isinf(z1) || std::isinf(z2)) return -kInf;
  const double s2 = (1.0 - rho) * (1.0 + rho);
  const double q = z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2;
  return -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(s2) - 0.5 * q / s2;
}

double bvn_pdf(double z1, double z2, double rho) { return std::exp(bvn_log_pdf(z1, z2, rho)); }

ConditionalNormal conditional_normal(double z_given, double rho) {
  check_rho(rho);
  if (std::abs(rho) >= 1.0) throw std::invalid_argument("conditional normal is degenerate at |rho| = 1");
  return {rho * z_given, std::sqrt((1.0 - rho) * (1.0 + rho))};
}

double strip_probability(double z_fixed, double a, double b, double rho) {
  if (std::isnan(a) || std::isnan(b) || std::isnan(z_fixed)) throw std::invalid_argument("strip argument is NaN");
  if (a > b) throw std::invalid_argument("strip bounds crossed (a > b)");
  const auto cond = conditional_normal(z_fixed, rho);
  if (std::isinf(z_fixed)) return 0.0;
  return norm_pdf(z_fixed) * norm_interval((a - cond.mean) / cond.sd, (b - cond.mean) / cond.sd);
}

double rectangle_probability(double a1, double b1, double a2, double b2, double rho) {
  if (std::isnan(a1) || std::isnan(b1) || std::isnan(a2) || std::isnan(b2))
    throw std::invalid_argument("rectangle bound is NaN");
  if (a1 > b1 || a2 > b2) throw std::invalid_argument("rectangle bounds crossed");
  check_rho(rho);
  const double cap = std::min(norm_interval(a1, b1), norm_interval(a2, b2));

  // Narrow rectangles: the four-term CDF difference cancels to a few ulps of the
  // CDF values, so integrate the conditional interval over the narrow side.
  const double w1 = b1 - a1, w2 = b2 - a2;
  const double s = std::sqrt((1.0 - rho) * (1.0 + rho));
  if (s > 0.0 && std::min(w1, w2) <= 0.25 && std::abs(rho) * std::min(w1, w2) <= 0.25 * s) {
    double lo = a1, hi = b1, c_lo = a2, c_hi = b2;
    if (w2 < w1) {
      std::swap(lo, c_lo);
      std::swap(hi, c_hi);
    }
    const HalfRule& gl = rules()[2];
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    double p = 0.0;
    for (std::size_t i = 0; i < gl.x.size(); ++i)
      for (double sign : {-1.0, 1.0}) {
        const double z = mid + sign * half * gl.x[i];
        p += gl.w[i] * norm_pdf(z) * norm_interval((c_lo - rho * z) / s, (c_hi - rho * z) / s);
      }
    return std::clamp(half * p, 0.0, cap);
  }

  // Reflect each coordinate towards the lower tail so the four CDF terms are small.
  if (a1 + b1 > 0.0) {
    std::swap(a1, b1);
    a1 = -a1;
    b1 = -b1;
    rho = -rho;
  }
  if (a2 + b2 > 0.0) {
    std::swap(a2, b2);
    a2 = -a2;
    b2 = -b2;
    rho = -rho;
  }
  const double p = bvn_cdf(b1, b2, rho) - bvn_cdf(a1, b2, rho) - bvn_cdf(b1, a2, rho) + bvn_cdf(a1, a2, rho);
  return std::clamp(p, 0.0, cap);
}

}  // namespace npb
