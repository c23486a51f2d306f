#include "npb/sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "npb/errors.hpp"
#include "npb/margins.hpp"
#include "npb/normal.hpp"
#include "npb/rng.hpp"

namespace npb {
namespace {

constexpr double kWeibullShape = 1.4;
constexpr double kWeibullRate = 2.0;
constexpr double kGammaShape = 1.5;
constexpr double kGammaRate = 1.2;

const boost::math::chi_squared chisq3(3.0);
const boost::math::gamma_distribution<> gamma_time(kGammaShape, 1.0 / kGammaRate);

// Root of a monotone increasing f on [lo, hi] to full double precision.
template <class F>
double solve_increasing(F f, double lo, double hi) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (flo > 0.0 || fhi < 0.0) throw NumericError("root not bracketed");
  boost::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(52),
                                                   iters);
  return 0.5 * (r.first + r.second);
}

// Phi^{-1} from a (lower, upper) probability pair.
double latent_from(double p, double q) { return p < 0.5 ? norm_quantile(p) : norm_quantile_upper(q); }

double mixture_cdf(double y) { return 0.5 * norm_cdf(y - 1.0) + 0.5 * norm_cdf((y - 4.0) / 1.5); }
double mixture_upper(double y) { return 0.5 * norm_cdf_upper(y - 1.0) + 0.5 * norm_cdf_upper((y - 4.0) / 1.5); }

// Gumbel (minimum extreme value) CDF 1 - exp(-e^z).
double gumbel_min_cdf(double z) { return -std::expm1(-std::exp(z)); }

}  // namespace

std::string to_string(BiomarkerDist d) {
  switch (d) {
    case BiomarkerDist::normal: return "normal";
    case BiomarkerDist::normal_mixture: return "normal_mixture";
    case BiomarkerDist::chisq: return "chisq";
  }
  return "?";
}

std::string to_string(TimeDist d) {
  switch (d) {
    case TimeDist::lognormal: return "lognormal";
    case TimeDist::weibull: return "weibull";
    case TimeDist::gamma: return "gamma";
  }
  return "?";
}

BiomarkerDist parse_biomarker_dist(const std::string& name) {
  if (name == "normal") return BiomarkerDist::normal;
  if (name == "normal_mixture" || name == "mixture") return BiomarkerDist::normal_mixture;
  if (name == "chisq" || name == "chisq3") return BiomarkerDist::chisq;
  throw std::invalid_argument("unknown biomarker distribution '" + name + "' (normal, normal_mixture, chisq)");
}

TimeDist parse_time_dist(const std::string& name) {
  if (name == "lognormal") return TimeDist::lognormal;
  if (name == "weibull") return TimeDist::weibull;
  if (name == "gamma") return TimeDist::gamma;
  throw std::invalid_argument("unknown event-time distribution '" + name + "' (lognormal, weibull, gamma)");
}

double biomarker_cdf(BiomarkerDist d, double y) {
  if (std::isnan(y)) throw std::invalid_argument("biomarker value is NaN");
  if (std::isinf(y)) return y > 0 ? 1.0 : 0.0;
  switch (d) {
    case BiomarkerDist::normal: return norm_cdf(y);
    case BiomarkerDist::normal_mixture: return mixture_cdf(y);
    case BiomarkerDist::chisq: return y <= 0.0 ? 0.0 : boost::math::cdf(chisq3, y);
  }
  return 0.0;
}

double biomarker_latent(BiomarkerDist d, double y) {
  if (std::isnan(y)) throw std::invalid_argument("biomarker value is NaN");
  if (std::isinf(y)) return y;
  switch (d) {
    case BiomarkerDist::normal: return y;
    case BiomarkerDist::normal_mixture: return latent_from(mixture_cdf(y), mixture_upper(y));
    case BiomarkerDist::chisq:
      if (y <= 0.0) return -kInf;
      return latent_from(boost::math::cdf(chisq3, y), boost::math::cdf(boost::math::complement(chisq3, y)));
  }
  return 0.0;
}

double biomarker_from_latent(BiomarkerDist d, double z) {
  if (std::isnan(z)) throw std::invalid_argument("latent value is NaN");
  if (std::isinf(z)) {
    if (d == BiomarkerDist::chisq && z < 0) return 0.0;
    return z;
  }
  switch (d) {
    case BiomarkerDist::normal: return z;
    case BiomarkerDist::normal_mixture: {
      // the mixture quantile lies between the component quantiles
      const double a = 1.0 + z;
      const double b = 4.0 + 1.5 * z;
      if (a == b) return a;
      return solve_increasing([&](double y) { return biomarker_latent(d, y) - z; }, std::min(a, b), std::max(a, b));
    }
    case BiomarkerDist::chisq: {
      const double p = norm_cdf(z);
      if (p <= 0.0) return 0.0;
      if (z < 0.0) return boost::math::quantile(chisq3, p);
      return boost::math::quantile(boost::math::complement(chisq3, norm_cdf_upper(z)));
    }
  }
  return 0.0;
}

double time_cdf(TimeDist d, double t) {
  if (std::isnan(t)) throw std::invalid_argument("event time is NaN");
  if (t <= 0.0) return 0.0;
  if (std::isinf(t)) return 1.0;
  switch (d) {
    case TimeDist::lognormal: return norm_cdf(std::log(t));
    case TimeDist::weibull: return -std::expm1(-std::pow(kWeibullRate * t, kWeibullShape));
    case TimeDist::gamma: return boost::math::cdf(gamma_time, t);
  }
  return 0.0;
}

double time_latent(TimeDist d, double t) {
  if (std::isnan(t)) throw std::invalid_argument("event time is NaN");
  if (t <= 0.0) return -kInf;
  if (std::isinf(t)) return kInf;
  switch (d) {
    case TimeDist::lognormal: return std::log(t);
    case TimeDist::weibull: {
      const double hz = std::pow(kWeibullRate * t, kWeibullShape);
      return latent_from(-std::expm1(-hz), std::exp(-hz));
    }
    case TimeDist::gamma:
      return latent_from(boost::math::cdf(gamma_time, t), boost::math::cdf(boost::math::complement(gamma_time, t)));
  }
  return 0.0;
}

double time_from_latent(TimeDist d, double z) {
  if (std::isnan(z)) throw std::invalid_argument("latent value is NaN");
  if (std::isinf(z)) return z > 0 ? kInf : 0.0;
  switch (d) {
    case TimeDist::lognormal: return std::exp(z);
    case TimeDist::weibull: {
      // cumulative hazard H = -log(1 - p)
      const double hz = z < 0.0 ? -std::log1p(-norm_cdf(z)) : -std::log(norm_cdf_upper(z));
      return std::pow(hz, 1.0 / kWeibullShape) / kWeibullRate;
    }
    case TimeDist::gamma: {
      const double p = norm_cdf(z);
      if (p <= 0.0) return 0.0;
      if (z < 0.0) return boost::math::quantile(gamma_time, p);
      return boost::math::quantile(boost::math::complement(gamma_time, norm_cdf_upper(z)));
    }
  }
  return 0.0;
}

void validate(const DgpConfig& config) {
  if (config.n == 0) throw std::invalid_argument("sample size must be positive");
  if (!(std::abs(config.rho) < 1.0)) throw std::invalid_argument("rho must satisfy |rho| < 1");
  if (!(config.censor_rate >= 0.0 && config.censor_rate < 1.0))
    throw std::invalid_argument("censoring rate must lie in [0, 1)");
  if (config.covariates && (!std::isfinite(config.covariates->gamma_y) || !std::isfinite(config.covariates->gamma_t)))
    throw std::invalid_argument("covariate effects must be finite");
}

double censoring_offset(double kappa) {
  if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("censoring rate must lie in (0, 1)");
  return norm_quantile(kappa) * std::numbers::sqrt2;
}

SimulatedData generate_dataset(const DgpConfig& config, std::uint64_t cell, std::uint64_t replication) {
  validate(config);
  Philox rng(config.seed, streams::make(streams::kDataset, cell, replication));
  Philox crng(config.seed, streams::make(streams::kCensoring, cell, replication));
  const bool censor = config.censor_rate > 0.0;
  const double a = censor ? censoring_offset(config.censor_rate) : 0.0;
  const double s = std::sqrt(1.0 - config.rho * config.rho);
  const double gy = config.covariates ? config.covariates->gamma_y : 0.0;
  const double gt = config.covariates ? config.covariates->gamma_t : 0.0;

  SimulatedData out;
  if (config.covariates) out.covariate_names = {"x"};
  out.observations.reserve(config.n);
  out.event_time.reserve(config.n);
  out.censoring_time.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    const double z1 = rng.normal();
    const double z2 = config.rho * z1 + s * rng.normal();
    const double x = config.covariates ? rng.uniform() : 0.0;
    const double y = biomarker_from_latent(config.biomarker, z1 + gy * x);
    const double t = time_from_latent(config.time, z2 + gt * x);
    const double c = censor ? time_from_latent(config.time, crng.normal() - a + gt * x) : kInf;
    Observation o;
    o.y_lower = o.y_upper = y;
    if (c < t) {
      o.t_lower = c;
      o.t_upper = kInf;
    } else {
      o.t_lower = o.t_upper = t;
    }
    if (config.covariates) o.x = {x};
    out.observations.push_back(std::move(o));
    out.event_time.push_back(t);
    out.censoring_time.push_back(c);
  }
  return out;
}

double event_time_quantile(const DgpConfig& config, double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile level must lie in (0, 1)");
  const double gt = config.covariates ? config.covariates->gamma_t : 0.0;
  if (gt == 0.0) return time_from_latent(config.time, norm_quantile(q));
  // P(T <= t) = integral_0^1 Phi(w - gt x) dx = (Psi(w) - Psi(w - gt)) / gt, Psi(s) = s Phi(s) + phi(s)
  auto psi = [](double v) { return v * norm_cdf(v) + norm_pdf(v); };
  auto mass = [&](double w) { return (psi(w) - psi(w - gt)) / gt - q; };
  const double lo = std::min(0.0, gt) + norm_quantile(q) - 1.0;
  const double hi = std::max(0.0, gt) + norm_quantile(q) + 1.0;
  return time_from_latent(config.time, solve_increasing(mass, lo, hi));
}

double conditional_event_time_quantile(const DgpConfig& config, double q, double x) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile level must lie in (0, 1)");
  const double gt = config.covariates ? config.covariates->gamma_t : 0.0;
  return time_from_latent(config.time, norm_quantile(q) + gt * x);
}

RocCurve true_roc(const DgpConfig& config, double t, std::optional<double> x, std::size_t grid_size) {
  validate(config);
  if (config.covariates.has_value() != x.has_value())
    throw std::invalid_argument(config.covariates ? "covariate design needs a covariate value"
                                                  : "design has no covariate");
  const double gy = config.covariates ? config.covariates->gamma_y : 0.0;
  const double gt = config.covariates ? config.covariates->gamma_t : 0.0;
  const double xv = x.value_or(0.0);
  const double w = time_latent(config.time, t) - gt * xv;
  if (!std::isfinite(w)) throw NumericError("horizon outside the event-time support");
  RocCurve curve = latent_roc_curve(w, config.rho, grid_size);
  curve.horizon = t;
  if (x) curve.x = {*x};
  for (double& u : curve.thresholds) u = biomarker_from_latent(config.biomarker, u + gy * xv);
  return curve;
}

double rise(const RocCurve& estimated, const RocCurve& truth) {
  auto check = [](const RocCurve& c, const char* name) {
    if (c.fpr.size() < 2 || c.fpr.size() != c.tpr.size())
      throw std::invalid_argument(std::string(name) + " ROC curve is empty");
    if (c.fpr.front() != 0.0 || c.fpr.back() != 1.0)
      throw std::invalid_argument(std::string(name) + " ROC curve must span fpr 0 to 1");
    for (std::size_t i = 1; i < c.fpr.size(); ++i)
      if (c.fpr[i] < c.fpr[i - 1]) throw std::invalid_argument(std::string(name) + " ROC curve fpr must be sorted");
  };
  check(estimated, "estimated");
  check(truth, "true");
  std::vector<double> grid = estimated.fpr;
  grid.insert(grid.end(), truth.fpr.begin(), truth.fpr.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  // Line of the curve over the open segment (a, b), which contains no knot of the curve.
  auto ends = [](const RocCurve& c, double a, double b) {
    const double mid = 0.5 * (a + b);
    const std::size_t j = static_cast<std::size_t>(std::upper_bound(c.fpr.begin(), c.fpr.end(), mid) - c.fpr.begin());
    const std::size_t i = j - 1;
    const double slope = (c.tpr[j] - c.tpr[i]) / (c.fpr[j] - c.fpr[i]);
    return std::pair{c.tpr[i] + slope * (a - c.fpr[i]), c.tpr[i] + slope * (b - c.fpr[i])};
  };
  double total = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double a = grid[k - 1];
    const double b = grid[k];
    const auto [ea, eb] = ends(estimated, a, b);
    const auto [ta, tb] = ends(truth, a, b);
    const double d0 = ea - ta;
    const double d1 = eb - tb;
    total += (b - a) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
  }
  return std::sqrt(std::max(total, 0.0));
}

RocCurve empirical_baseline_roc(std::span<const Observation> data, double t) {
  if (data.empty()) throw std::invalid_argument("no observations");
  if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("horizon must be positive and finite");
  std::vector<double> times(data.size());
  std::vector<bool> event(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Observation& o = data[i];
    if (!o.y_exact()) throw std::invalid_argument("empirical ROC needs exact biomarker values");
    if (!o.t_exact() && !o.right_censored()) throw std::invalid_argument("empirical ROC needs right-censored times");
    times[i] = o.t_lower;
    event[i] = o.t_exact();
  }
  const KaplanMeier g = censoring_kaplan_meier(times, event);

  struct Point {
    double y;
    double case_weight;
    double control_weight;
  };
  std::vector<Point> pts;
  double cases = 0.0;
  double controls = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Point p{data[i].y_lower, 0.0, 0.0};
    if (event[i] && times[i] <= t) {
      p.case_weight = 1.0 / g.survival_before(times[i]);
    } else if (times[i] > t) {
      p.control_weight = 1.0;  // weight 1 / G(t) is common to all controls
    } else {
      continue;  // censored before t: carries no information
    }
    cases += p.case_weight;
    controls += p.control_weight;
    pts.push_back(p);
  }
  if (!(cases > 0.0)) throw NumericError("no events at or before the horizon");
  if (!(controls > 0.0)) throw NumericError("nobody is known to survive the horizon");
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.y > b.y; });

  RocCurve curve;
  curve.horizon = t;
  curve.thresholds.push_back(kInf);
  curve.fpr.push_back(0.0);
  curve.tpr.push_back(0.0);
  double tp = 0.0;
  double fp = 0.0;
  for (std::size_t k = 0; k < pts.size();) {
    const double y = pts[k].y;
    for (; k < pts.size() && pts[k].y == y; ++k) {
      tp += pts[k].case_weight;
      fp += pts[k].control_weight;
    }
    curve.thresholds.push_back(y);  // classify positive when marker >= y
    curve.fpr.push_back(std::min(fp / controls, 1.0));
    curve.tpr.push_back(std::min(tp / cases, 1.0));
  }
  curve.fpr.back() = 1.0;
  curve.tpr.back() = 1.0;
  curve.thresholds.push_back(-kInf);
  curve.fpr.push_back(1.0);
  curve.tpr.push_back(1.0);
  for (std::size_t i = 1; i < curve.fpr.size(); ++i)
    curve.auc += 0.5 * (curve.fpr[i] - curve.fpr[i - 1]) * (curve.tpr[i] + curve.tpr[i - 1]);
  return curve;
}

double misspecification_censoring_offset(double kappa) {
  if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("censoring rate must lie in (0, 1)");
  // log T - log T' = sqrt(6.5) N + L with L standard logistic (difference of two
  // independent Gumbel-min variables); P(T > C) = P(log T - log T' > d).
  const double sigma = std::sqrt(6.5);
  auto exceed = [&](double d) {
    auto f = [&](double s) { return norm_pdf(s) / (1.0 + std::exp(d - sigma * s)); };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -kInf, kInf, 15, 1e-13);
  };
  return solve_increasing([&](double d) { return kappa - exceed(d); }, -60.0, 60.0);
}

SimulatedData misspecification_scenario(const MisspecConfig& config, std::uint64_t replication) {
  if (config.n == 0) throw std::invalid_argument("sample size must be positive");
  if (!(config.censor_rate >= 0.0 && config.censor_rate < 1.0))
    throw std::invalid_argument("censoring rate must lie in [0, 1)");
  Philox rng(config.seed, streams::make(streams::kDataset, 0, replication));
  Philox crng(config.seed, streams::make(streams::kCensoring, 0, replication));
  const bool censor = config.censor_rate > 0.0;
  const double d = censor ? misspecification_censoring_offset(config.censor_rate) : 0.0;
  auto gumbel_min = [](Philox& g) { return std::log(-std::log(g.uniform())); };
  auto log_time = [&](Philox& g) {
    const double x = 1.0 + g.normal();
    const double y = x + g.normal();
    return std::array<double, 3>{x, y, y + 0.5 * x + gumbel_min(g)};
  };

  SimulatedData out;
  out.covariate_names = {"x"};
  for (std::size_t i = 0; i < config.n; ++i) {
    const auto [x, y, lt] = log_time(rng);
    const double t = std::exp(lt);
    const double c = censor ? std::exp(log_time(crng)[2] + d) : kInf;
    Observation o;
    o.y_lower = o.y_upper = y;
    if (c < t) {
      o.t_lower = c;
      o.t_upper = kInf;
    } else {
      o.t_lower = o.t_upper = t;
    }
    o.x = {x};
    out.observations.push_back(std::move(o));
    out.event_time.push_back(t);
    out.censoring_time.push_back(c);
  }
  return out;
}

RocCurve misspecification_true_roc(double t, double x, std::size_t grid_size) {
  if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("horizon must be positive and finite");
  if (!std::isfinite(x)) throw std::invalid_argument("covariate must be finite");
  if (grid_size < 2) throw std::invalid_argument("ROC grid needs at least 2 thresholds");
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  const double shift = std::log(t) - 1.5 * x;
  // with s = y - x: P(T <= t | y, x) = F_Z(log t - 1.5 x - s)
  auto f = [&](double s) { return norm_pdf(s) * gumbel_min_cdf(shift - s); };
  auto piece = [&](double a, double b) { return GK::integrate(f, a, b, 15, 1e-12); };

  // standardized thresholds, decreasing: +inf, Phi^{-1}(G/(G+1)), ..., -inf
  std::vector<double> s{kInf};
  for (std::size_t k = grid_size; k >= 1; --k)
    s.push_back(norm_quantile(static_cast<double>(k) / static_cast<double>(grid_size + 1)));
  s.push_back(-kInf);

  std::vector<double> joint(s.size(), 0.0);  // P(Y > c, T <= t | x)
  for (std::size_t k = 1; k < s.size(); ++k) joint[k] = joint[k - 1] + piece(s[k], s[k - 1]);
  const double cases = joint.back();
  if (!(cases > kDenominatorGuard) || !(1.0 - cases > kDenominatorGuard))
    throw NumericError("horizon leaves no cases or no controls");

  RocCurve curve;
  curve.horizon = t;
  curve.x = {x};
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double above = std::isinf(s[k]) ? (s[k] > 0 ? 0.0 : 1.0) : norm_cdf_upper(s[k]);
    curve.thresholds.push_back(x + s[k]);
    curve.tpr.push_back(std::clamp(joint[k] / cases, 0.0, 1.0));
    curve.fpr.push_back(std::clamp((above - joint[k]) / (1.0 - cases), 0.0, 1.0));
  }
  curve.tpr.back() = curve.fpr.back() = 1.0;
  for (std::size_t i = 1; i < curve.fpr.size(); ++i) {
    curve.fpr[i] = std::max(curve.fpr[i], curve.fpr[i - 1]);
    curve.tpr[i] = std::max(curve.tpr[i], curve.tpr[i - 1]);
    curve.auc += 0.5 * (curve.fpr[i] - curve.fpr[i - 1]) * (curve.tpr[i] + curve.tpr[i - 1]);
  }
  return curve;
}

}  // namespace npb
