#include "npb/roc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "npb/bvn.hpp"
#include "npb/errors.hpp"
#include "npb/normal.hpp"

namespace npb {
namespace {

// Latent horizon w = Phi^{-1}(F_T(t|x)) with both denominators checked.
double latent_horizon(const NpbModel& model, double t, std::span<const double> x, bool need_cases,
                      bool need_controls) {
  if (std::isnan(t)) throw std::invalid_argument("horizon is NaN");
  const double w = model.latent_t(t, x);
  if (need_cases && !(norm_cdf(w) > kDenominatorGuard))
    throw NumericError("horizon " + std::to_string(t) + " precedes the event-time distribution (F_T(t|x) <= 1e-10)");
  if (need_controls && !(norm_cdf_upper(w) > kDenominatorGuard))
    throw NumericError("horizon " + std::to_string(t) + " is beyond the event-time distribution (1 - F_T(t|x) <= 1e-10)");
  return w;
}

// All accuracy measures below work with the latent threshold u = Phi^{-1}(F_Y(c|x)).
double se_latent(double u, double w, double rho) { return bvn_cdf(-u, w, -rho) / norm_cdf(w); }
double fpr_latent(double u, double w, double rho) { return bvn_upper(u, w, rho) / norm_cdf_upper(w); }

double incident_se_latent(double u, double w, double rho) {
  if (!(std::abs(rho) < 1.0)) throw NumericError("incident sensitivity needs |rho| < 1");
  const double s = std::sqrt(1.0 - rho * rho);
  if (std::isinf(u)) return u > 0 ? 0.0 : 1.0;
  return norm_cdf((rho * w - u) / s);
}

void check_grid(std::size_t grid_size) {
  if (grid_size < 2) throw std::invalid_argument("ROC grid needs at least 2 thresholds");
}

// Latent thresholds in decreasing order: +inf, quantiles G/(G+1) .. 1/(G+1), -inf.
std::vector<double> latent_grid(std::size_t grid_size) {
  std::vector<double> u;
  u.reserve(grid_size + 2);
  u.push_back(kInf);
  for (std::size_t k = grid_size; k >= 1; --k)
    u.push_back(norm_quantile(static_cast<double>(k) / static_cast<double>(grid_size + 1)));
  u.push_back(-kInf);
  return u;
}

double trapezoid(const std::vector<double>& fpr, const std::vector<double>& tpr) {
  double area = 0.0;
  for (std::size_t i = 1; i < fpr.size(); ++i) area += 0.5 * (fpr[i] - fpr[i - 1]) * (tpr[i] + tpr[i - 1]);
  return std::clamp(area, 0.0, 1.0);
}

std::vector<double> marker_thresholds(const NpbModel& model, std::span<const double> x, std::size_t grid_size) {
  std::vector<double> c;
  c.reserve(grid_size + 2);
  c.push_back(kInf);
  for (std::size_t k = grid_size; k >= 1; --k)
    c.push_back(model.quantile_y(static_cast<double>(k) / static_cast<double>(grid_size + 1), x));
  c.push_back(-kInf);
  return c;
}

template <class Se, class Fpr>
RocCurve latent_curve(std::size_t grid_size, Se se, Fpr fpr) {
  check_grid(grid_size);
  RocCurve curve;
  const auto u = latent_grid(grid_size);
  curve.fpr.reserve(u.size());
  curve.tpr.reserve(u.size());
  for (double uk : u) {
    curve.fpr.push_back(std::clamp(fpr(uk), 0.0, 1.0));
    curve.tpr.push_back(std::clamp(se(uk), 0.0, 1.0));
  }
  // The exact values are monotone in u; remove bvn rounding wobble so the curve is too.
  for (std::size_t i = 1; i < u.size(); ++i) {
    curve.fpr[i] = std::max(curve.fpr[i], curve.fpr[i - 1]);
    curve.tpr[i] = std::max(curve.tpr[i], curve.tpr[i - 1]);
  }
  curve.auc = trapezoid(curve.fpr, curve.tpr);
  return curve;
}

template <class Se, class Fpr>
RocCurve build_curve(const NpbModel& model, double t, std::span<const double> x, std::size_t grid_size, Se se, Fpr fpr,
                     bool thresholds) {
  RocCurve curve = latent_curve(grid_size, se, fpr);
  curve.horizon = t;
  curve.x.assign(x.begin(), x.end());
  if (thresholds) curve.thresholds = marker_thresholds(model, x, grid_size);
  return curve;
}

}  // namespace

RocCurve latent_roc_curve(double w, double rho, std::size_t grid_size) {
  if (!(norm_cdf(w) > kDenominatorGuard) || !(norm_cdf_upper(w) > kDenominatorGuard))
    throw NumericError("latent horizon leaves no cases or no controls");
  if (!(std::abs(rho) <= 1.0)) throw std::invalid_argument("rho must lie in [-1, 1]");
  RocCurve curve = latent_curve(
      grid_size, [&](double u) { return se_latent(u, w, rho); }, [&](double u) { return fpr_latent(u, w, rho); });
  curve.thresholds = latent_grid(grid_size);
  return curve;
}

double cumulative_sensitivity(const NpbModel& model, double c, double t, std::span<const double> x) {
  const double w = latent_horizon(model, t, x, true, false);
  return std::clamp(se_latent(model.latent_y(c, x), w, model.rho(x)), 0.0, 1.0);
}

double dynamic_specificity(const NpbModel& model, double c, double t, std::span<const double> x) {
  const double w = latent_horizon(model, t, x, false, true);
  return std::clamp(1.0 - fpr_latent(model.latent_y(c, x), w, model.rho(x)), 0.0, 1.0);
}

double incident_sensitivity(const NpbModel& model, double c, double t, std::span<const double> x) {
  const double w = model.latent_t(t, x);
  if (std::isinf(w)) throw NumericError("incident sensitivity needs a horizon inside the event-time support");
  return incident_se_latent(model.latent_y(c, x), w, model.rho(x));
}

RocCurve roc_curve(const NpbModel& model, double t, std::span<const double> x, std::size_t grid_size) {
  const double w = latent_horizon(model, t, x, true, true);
  const double rho = model.rho(x);
  return build_curve(
      model, t, x, grid_size, [&](double u) { return se_latent(u, w, rho); },
      [&](double u) { return fpr_latent(u, w, rho); }, true);
}

double auc(const NpbModel& model, double t, std::span<const double> x, std::size_t grid_size) {
  const double w = latent_horizon(model, t, x, true, true);
  const double rho = model.rho(x);
  return build_curve(
             model, t, x, grid_size, [&](double u) { return se_latent(u, w, rho); },
             [&](double u) { return fpr_latent(u, w, rho); }, false)
      .auc;
}

RocCurve incident_static_roc(const NpbModel& model, double t, double t_star, std::span<const double> x,
                             std::size_t grid_size) {
  const double w = model.latent_t(t, x);
  if (std::isinf(w)) throw NumericError("incident sensitivity needs a horizon inside the event-time support");
  const double w_star = latent_horizon(model, t_star, x, false, true);
  const double rho = model.rho(x);
  return build_curve(
      model, t, x, grid_size, [&](double u) { return incident_se_latent(u, w, rho); },
      [&](double u) { return fpr_latent(u, w_star, rho); }, true);
}

RocCurve incident_dynamic_roc(const NpbModel& model, double t, std::span<const double> x, std::size_t grid_size) {
  return incident_static_roc(model, t, t, x, grid_size);
}

YoudenResult youden(const NpbModel& model, double t, std::span<const double> x, std::size_t grid_size) {
  check_grid(grid_size);
  const double w = latent_horizon(model, t, x, true, true);
  const double rho = model.rho(x);
  const auto j = [&](double u) { return se_latent(u, w, rho) - fpr_latent(u, w, rho); };
  // increasing order here: u[0] is the smallest threshold
  std::vector<double> u(grid_size);
  std::vector<double> value(grid_size);
  for (std::size_t k = 0; k < grid_size; ++k) {
    u[k] = norm_quantile(static_cast<double>(k + 1) / static_cast<double>(grid_size + 1));
    value[k] = j(u[k]);
  }
  const double best = *std::max_element(value.begin(), value.end());
  const double worst = *std::min_element(value.begin(), value.end());
  std::size_t arg = 0;
  while (value[arg] < best - 1e-12) ++arg;
  YoudenResult r;
  // Se + Sp - 1 is analytic in the threshold, so it is either constant (rho = 0)
  // or has isolated maxima; symmetric cases tie at two neighbouring grid points.
  r.flat = best - worst <= 1e-12;
  double u_star = u[arg];
  double j_star = value[arg];
  if (!r.flat) {
    double lo = arg > 0 ? u[arg - 1] : u[arg] - (u[arg + 1] - u[arg]);
    double hi = arg + 1 < grid_size ? u[arg + 1] : u[arg] + (u[arg] - u[arg - 1]);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = hi - g * (hi - lo);
    double b = lo + g * (hi - lo);
    double fa = j(a);
    double fb = j(b);
    for (int it = 0; it < 100 && hi - lo > 1e-10; ++it) {
      if (fa >= fb) {
        hi = b;
        b = a;
        fb = fa;
        a = hi - g * (hi - lo);
        fa = j(a);
      } else {
        lo = a;
        a = b;
        fa = fb;
        b = lo + g * (hi - lo);
        fb = j(b);
      }
    }
    const double um = 0.5 * (lo + hi);
    const double jm = j(um);
    if (jm > j_star) {
      u_star = um;
      j_star = jm;
    }
  }
  r.sensitivity = std::clamp(se_latent(u_star, w, rho), 0.0, 1.0);
  r.specificity = std::clamp(1.0 - fpr_latent(u_star, w, rho), 0.0, 1.0);
  r.index = std::clamp(r.sensitivity + r.specificity - 1.0, 0.0, 1.0);
  r.threshold = model.quantile_y(norm_cdf(u_star), x);
  return r;
}

double conditional_survival_given_marker_range(const NpbModel& model, double a, double b, double t,
                                               std::span<const double> x) {
  if (!(a < b)) throw std::invalid_argument("marker range needs a < b");
  const double ua = model.latent_y(a, x);
  const double ub = model.latent_y(b, x);
  const double mass = norm_interval(ua, ub);
  if (!(mass > kDenominatorGuard)) throw NumericError("marker range carries no probability mass");
  const double w = model.latent_t(t, x);
  return std::clamp(rectangle_probability(ua, ub, w, kInf, model.rho(x)) / mass, 0.0, 1.0);
}

double conditional_time_quantile(const NpbModel& model, double p, double a, double b, std::span<const double> x) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile level must lie in (0, 1)");
  if (!(a < b)) throw std::invalid_argument("marker range needs a < b");
  const double ua = model.latent_y(a, x);
  const double ub = model.latent_y(b, x);
  const double mass = norm_interval(ua, ub);
  if (!(mass > kDenominatorGuard)) throw NumericError("marker range carries no probability mass");
  const double rho = model.rho(x);
  const auto cdf = [&](double w) { return rectangle_probability(ua, ub, -kInf, w, rho) / mass; };
  double lo = -1.0;
  double hi = 1.0;
  while (cdf(lo) > p && lo > -60.0) lo *= 2.0;
  while (cdf(hi) < p && hi < 60.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < p ? lo : hi) = mid;
  }
  return model.quantile_t(norm_cdf(0.5 * (lo + hi)), x);
}

}  // namespace npb
