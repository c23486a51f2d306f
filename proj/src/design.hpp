#pragma once

// Precomputed basis rows for one margin of a dataset. The data are fixed while
// a likelihood is optimised, so basis evaluation happens once per fit.

#include <cstdint>
#include <span>
#include <vector>

#include "npb/bernstein.hpp"
#include "npb/margins.hpp"

namespace npb::detail {

struct MarginDesign {
  std::size_t n = 0;
  std::size_t width = 0;  // order + 1
  std::size_t p = 0;      // covariates
  std::vector<std::uint8_t> exact;
  std::vector<std::uint8_t> lower_finite;  // interval rows only
  std::vector<std::uint8_t> upper_finite;
  std::vector<double> basis_a;  // exact: b(v);  interval: b(lower)
  std::vector<double> basis_b;  // exact: b'(v); interval: b(upper)
  std::vector<double> x;        // n * p

  std::span<const double> row_a(std::size_t i) const { return {basis_a.data() + i * width, width}; }
  std::span<const double> row_b(std::size_t i) const { return {basis_b.data() + i * width, width}; }
  std::span<const double> row_x(std::size_t i) const { return {x.data() + i * p, p}; }
};

/// Throws std::invalid_argument (naming the row) for crossed, empty or NaN intervals.
MarginDesign build_design(const BernsteinBasis& basis, std::span<const double> lower, std::span<const double> upper,
                          const std::vector<std::vector<double>>& x, std::span<const std::size_t> columns,
                          const char* margin_name);

/// Per-row quantities of a margin under given (theta, beta).
struct MarginPoint {
  double eta = 0.0;    // h(v) - x'beta
  double z = 0.0;      // latent normal scale, may be +-inf
  double slope = 0.0;  // dz/deta
};

struct MarginRow {
  bool exact = false;
  MarginPoint a;       // exact value or lower bound
  MarginPoint b;       // upper bound (interval rows)
  double hprime = 0.0; // exact rows
};

MarginRow evaluate_row(const MarginDesign& design, std::size_t i, const LinkFunction& link, std::span<const double> theta,
                       std::span<const double> beta);

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

/// Pairwise summation; deterministic for a given order.
double pairwise_sum(std::span<const double> v);

/// Chain rule from coefficient-space gradient to the unconstrained (log-increment) scale.
void coefficient_gradient_to_unconstrained(std::span<const double> raw, std::span<const double> grad_theta,
                                           std::span<double> grad_raw);

}  // namespace npb::detail
