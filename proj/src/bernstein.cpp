#include "npb/bernstein.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace npb {

BernsteinBasis::BernsteinBasis(int order, double lower, double upper, bool log_scale)
    : order_(order), lower_(lower), upper_(upper), log_scale_(log_scale) {
  if (order < 1) throw std::invalid_argument("Bernstein order must be >= 1");
  if (!std::isfinite(lower) || !std::isfinite(upper) || !(upper > lower))
    throw std::invalid_argument("Bernstein bounds require finite lower < upper");
}

double BernsteinBasis::to_working_scale(double v) const {
  if (!std::isfinite(v)) throw std::invalid_argument("Bernstein basis evaluated at a non-finite value");
  if (!log_scale_) return v;
  if (v <= 0.0)
    throw std::invalid_argument("log-scale Bernstein basis needs v > 0, got " + std::to_string(v));
  return std::log(v);
}

void BernsteinBasis::unit_basis(double s, int degree, std::span<double> out) const {
  // de Casteljau style build-up keeps every entry nonnegative and the sum at one.
  out[0] = 1.0;
  for (int k = 1; k <= degree; ++k) {
    double carry = 0.0;
    for (int m = 0; m < k; ++m) {
      const double prev = out[m];
      out[m] = carry + (1.0 - s) * prev;
      carry = s * prev;
    }
    out[k] = carry;
  }
}

void BernsteinBasis::evaluate(double v, std::span<double> out) const {
  const double w = to_working_scale(v);
  const double width = upper_ - lower_;
  const double s = (w - lower_) / width;
  if (s >= 0.0 && s <= 1.0) {
    unit_basis(s, order_, out);
    return;
  }
  // Linear continuation from the nearest boundary: b(edge) + (s - edge) * db/ds(edge).
  const double edge = s < 0.0 ? 0.0 : 1.0;
  unit_basis(edge, order_, out);
  const double d = s - edge;
  const double m = order_;
  if (edge == 0.0) {
    out[0] -= m * d;
    out[1] += m * d;
  } else {
    out[order_ - 1] -= m * d;
    out[order_] += m * d;
  }
}

std::vector<double> BernsteinBasis::evaluate(double v) const {
  std::vector<double> out(size());
  evaluate(v, out);
  return out;
}

void BernsteinBasis::derivative(double v, std::span<double> out) const {
  const double w = to_working_scale(v);
  const double width = upper_ - lower_;
  double s = (w - lower_) / width;
  s = std::clamp(s, 0.0, 1.0);
  // db_m/ds = M (b_{m-1,M-1}(s) - b_{m,M-1}(s))
  std::vector<double> lower_degree(static_cast<std::size_t>(order_));
  unit_basis(s, order_ - 1, lower_degree);
  double chain = order_ / width;
  if (log_scale_) chain /= v;
  for (int m = 0; m <= order_; ++m) {
    const double left = m > 0 ? lower_degree[m - 1] : 0.0;
    const double right = m < order_ ? lower_degree[m] : 0.0;
    out[m] = chain * (left - right);
  }
}

std::vector<double> BernsteinBasis::derivative(double v) const {
  std::vector<double> out(size());
  derivative(v, out);
  return out;
}

MonotoneTransform::MonotoneTransform(BernsteinBasis basis, std::vector<double> coefficients)
    : basis_(basis), coefficients_(std::move(coefficients)) {
  if (coefficients_.size() != basis_.size())
    throw std::invalid_argument("transform needs order+1 coefficients");
  for (std::size_t m = 0; m < coefficients_.size(); ++m) {
    if (!std::isfinite(coefficients_[m])) throw std::invalid_argument("non-finite transform coefficient");
    if (m > 0 && coefficients_[m] < coefficients_[m - 1])
      throw std::invalid_argument("transform coefficients must be nondecreasing");
  }
}

double MonotoneTransform::operator()(double v) const {
  std::vector<double> b(basis_.size());
  basis_.evaluate(v, b);
  double h = 0.0;
  for (std::size_t m = 0; m < b.size(); ++m) h += b[m] * coefficients_[m];
  return h;
}

double MonotoneTransform::derivative(double v) const {
  std::vector<double> b(basis_.size());
  basis_.derivative(v, b);
  double h = 0.0;
  for (std::size_t m = 0; m < b.size(); ++m) h += b[m] * coefficients_[m];
  return std::max(h, 0.0);
}

double MonotoneTransform::inverse(double target) const {
  if (std::isnan(target)) throw std::invalid_argument("transform inverse of NaN");
  const double l = basis_.lower();
  const double u = basis_.upper();
  const int M = basis_.order();
  const double h_lo = coefficients_.front();
  const double h_hi = coefficients_.back();
  const double slope_lo = M * (coefficients_[1] - coefficients_[0]) / (u - l);
  const double slope_hi = M * (coefficients_[M] - coefficients_[M - 1]) / (u - l);
  auto from_working = [&](double w) { return basis_.log_scale() ? std::exp(w) : w; };

  if (target < h_lo) {
    if (!(slope_lo > 0.0)) throw std::domain_error("transform is flat below its lower bound");
    return from_working(l + (target - h_lo) / slope_lo);
  }
  if (target > h_hi) {
    if (!(slope_hi > 0.0)) throw std::domain_error("transform is flat above its upper bound");
    return from_working(u + (target - h_hi) / slope_hi);
  }
  // Bisection on the working scale; values inside [l,u] never hit the log-domain check.
  double a = l;
  double b = u;
  std::vector<double> basis(basis_.size());
  auto h_working = [&](double w) {
    basis_.evaluate(from_working(w), basis);
    double h = 0.0;
    for (std::size_t m = 0; m < basis.size(); ++m) h += basis[m] * coefficients_[m];
    return h;
  };
  for (int it = 0; it < 200 && b - a > 0.0; ++it) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    if (h_working(mid) < target)
      a = mid;
    else
      b = mid;
  }
  return from_working(b);
}

std::vector<double> linear_coefficients(const BernsteinBasis& basis, double from, double to) {
  std::vector<double> c(basis.size());
  const int M = basis.order();
  for (int m = 0; m <= M; ++m) c[m] = from + (to - from) * m / M;
  return c;
}

}  // namespace npb
