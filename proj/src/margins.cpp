#include "npb/margins.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "design.hpp"
#include "npb/errors.hpp"
#include "npb/normal.hpp"
#include "npb/optim.hpp"

namespace npb {

std::string to_string(LinkKind kind) {
  switch (kind) {
    case LinkKind::probit: return "probit";
    case LinkKind::logit: return "logit";
    case LinkKind::cloglog: return "cloglog";
  }
  return "probit";
}

LinkKind parse_link(const std::string& name) {
  if (name == "probit") return LinkKind::probit;
  if (name == "logit") return LinkKind::logit;
  if (name == "cloglog") return LinkKind::cloglog;
  throw SchemaError("unknown link '" + name + "' (expected probit, logit or cloglog)");
}

double LinkFunction::cdf(double eta) const {
  switch (kind) {
    case LinkKind::probit: return norm_cdf(eta);
    case LinkKind::logit: return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
    case LinkKind::cloglog: return -std::expm1(-std::exp(eta));
  }
  return 0.0;
}

double LinkFunction::cdf_upper(double eta) const {
  switch (kind) {
    case LinkKind::probit: return norm_cdf_upper(eta);
    case LinkKind::logit: return LinkFunction{LinkKind::logit}.cdf(-eta);
    case LinkKind::cloglog: return std::exp(-std::exp(eta));
  }
  return 0.0;
}

double LinkFunction::log_pdf(double eta) const {
  switch (kind) {
    case LinkKind::probit: return norm_log_pdf(eta);
    case LinkKind::logit: {
      const double a = std::abs(eta);
      return -a - 2.0 * std::log1p(std::exp(-a));
    }
    case LinkKind::cloglog: return eta - std::exp(eta);
  }
  return 0.0;
}

double LinkFunction::pdf(double eta) const {
  if (std::isinf(eta)) return 0.0;
  return std::exp(log_pdf(eta));
}

double LinkFunction::dlog_pdf(double eta) const {
  switch (kind) {
    case LinkKind::probit: return -eta;
    case LinkKind::logit: return -std::tanh(0.5 * eta);
    case LinkKind::cloglog: return 1.0 - std::exp(eta);
  }
  return 0.0;
}

double LinkFunction::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("link quantile needs p in [0,1]");
  switch (kind) {
    case LinkKind::probit: return norm_quantile(p);
    case LinkKind::logit: return std::log(p) - std::log1p(-p);
    case LinkKind::cloglog: return std::log(-std::log1p(-p));
  }
  return 0.0;
}

double LinkFunction::latent(double eta) const {
  if (kind == LinkKind::probit) return eta;
  if (std::isinf(eta)) return eta;
  const double p = cdf(eta);
  if (p <= 0.5) return norm_quantile(p);
  return norm_quantile_upper(cdf_upper(eta));
}

double LinkFunction::latent_slope(double eta, double z) const {
  if (kind == LinkKind::probit) return 1.0;
  if (std::isinf(z)) return 0.0;
  return std::exp(log_pdf(eta) - norm_log_pdf(z));
}

double MarginalModel::linear_predictor(std::span<const double> x) const {
  if (x.size() != beta.size())
    throw std::invalid_argument("covariate vector has " + std::to_string(x.size()) + " entries, model expects " +
                                std::to_string(beta.size()));
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!std::isfinite(x[j])) throw std::invalid_argument("non-finite covariate value");
    s += x[j] * beta[j];
  }
  return s;
}

namespace {

// h(v) with the conventions used for censoring bounds: -inf / +inf pass through,
// and v <= 0 on a log scale is the lower end of the support.
double transform_bound(const MonotoneTransform& h, double v) {
  if (std::isnan(v)) throw std::invalid_argument("NaN value");
  if (v == kInf || v == -kInf) return v;
  if (h.basis().log_scale() && v <= 0.0) return -kInf;
  return h(v);
}

}  // namespace

double marginal_cdf(const MarginalModel& model, double v, std::span<const double> x) {
  const double lp = model.linear_predictor(x);
  const double h = transform_bound(model.transform, v);
  return model.link.cdf(h - lp);
}

double marginal_quantile(const MarginalModel& model, double p, std::span<const double> x) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("marginal quantile needs 0 < p < 1");
  const double target = model.link.quantile(p) + model.linear_predictor(x);
  return model.transform.inverse(target);
}

std::vector<double> coefficients_from_unconstrained(std::span<const double> raw) {
  std::vector<double> theta(raw.size());
  if (raw.empty()) return theta;
  theta[0] = raw[0];
  for (std::size_t m = 1; m < raw.size(); ++m) theta[m] = theta[m - 1] + std::exp(raw[m]);
  return theta;
}

std::vector<double> unconstrained_from_coefficients(std::span<const double> theta) {
  std::vector<double> raw(theta.size());
  if (theta.empty()) return raw;
  raw[0] = theta[0];
  for (std::size_t m = 1; m < theta.size(); ++m) {
    const double inc = theta[m] - theta[m - 1];
    if (!(inc >= 0.0)) throw std::domain_error("coefficients must be nondecreasing");
    // A zero increment (an optimum on the boundary, or an increment below the
    // rounding level of the coefficients) maps to the most negative finite value.
    raw[m] = inc > 0.0 ? std::log(inc) : kZeroIncrementLog;
  }
  return raw;
}

namespace detail {

MarginDesign build_design(const BernsteinBasis& basis, std::span<const double> lower, std::span<const double> upper,
                          const std::vector<std::vector<double>>& x, std::span<const std::size_t> columns,
                          const char* margin_name) {
  MarginDesign d;
  d.n = lower.size();
  d.width = basis.size();
  d.p = columns.size();
  if (upper.size() != d.n || x.size() != d.n) throw std::invalid_argument("design inputs differ in length");
  d.exact.assign(d.n, 0);
  d.lower_finite.assign(d.n, 0);
  d.upper_finite.assign(d.n, 0);
  d.basis_a.assign(d.n * d.width, 0.0);
  d.basis_b.assign(d.n * d.width, 0.0);
  d.x.assign(d.n * d.p, 0.0);
  auto fail = [&](std::size_t i, const std::string& msg) {
    throw std::invalid_argument(std::string(margin_name) + " row " + std::to_string(i) + ": " + msg);
  };
  for (std::size_t i = 0; i < d.n; ++i) {
    const double lo = lower[i];
    const double hi = upper[i];
    if (std::isnan(lo) || std::isnan(hi)) fail(i, "NaN bound");
    if (lo > hi) fail(i, "lower bound exceeds upper bound");
    std::span<double> a(d.basis_a.data() + i * d.width, d.width);
    std::span<double> b(d.basis_b.data() + i * d.width, d.width);
    if (lo == hi) {
      if (!std::isfinite(lo)) fail(i, "exact value must be finite");
      if (basis.log_scale() && lo <= 0.0) fail(i, "exact value must be positive on a log scale");
      d.exact[i] = 1;
      basis.evaluate(lo, a);
      basis.derivative(lo, b);
    } else {
      const bool lo_finite = std::isfinite(lo) && !(basis.log_scale() && lo <= 0.0);
      const bool hi_finite = std::isfinite(hi);
      if (hi_finite && basis.log_scale() && hi <= 0.0) fail(i, "interval has no mass on a log scale");
      if (lo == kInf) fail(i, "interval starts at +inf");
      if (hi == -kInf) fail(i, "interval ends at -inf");
      d.lower_finite[i] = lo_finite;
      d.upper_finite[i] = hi_finite;
      if (lo_finite) basis.evaluate(lo, a);
      if (hi_finite) basis.evaluate(hi, b);
    }
    if (x[i].size() < (columns.empty() ? 0 : *std::max_element(columns.begin(), columns.end()) + 1))
      fail(i, "covariate row too short");
    for (std::size_t j = 0; j < d.p; ++j) {
      const double v = x[i][columns[j]];
      if (!std::isfinite(v)) fail(i, "missing or non-finite covariate");
      d.x[i * d.p + j] = v;
    }
  }
  return d;
}

namespace {
MarginPoint make_point(double eta, const LinkFunction& link) {
  MarginPoint p;
  p.eta = eta;
  p.z = link.latent(eta);
  p.slope = link.latent_slope(eta, p.z);
  return p;
}
}  // namespace

MarginRow evaluate_row(const MarginDesign& design, std::size_t i, const LinkFunction& link, std::span<const double> theta,
                       std::span<const double> beta) {
  MarginRow row;
  const double lp = dot(design.row_x(i), beta);
  if (design.exact[i]) {
    row.exact = true;
    row.a = make_point(dot(design.row_a(i), theta) - lp, link);
    row.hprime = dot(design.row_b(i), theta);
    return row;
  }
  row.a = design.lower_finite[i] ? make_point(dot(design.row_a(i), theta) - lp, link) : MarginPoint{-kInf, -kInf, 0.0};
  row.b = design.upper_finite[i] ? make_point(dot(design.row_b(i), theta) - lp, link) : MarginPoint{kInf, kInf, 0.0};
  return row;
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double e : v) s += e;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

void coefficient_gradient_to_unconstrained(std::span<const double> raw, std::span<const double> grad_theta,
                                           std::span<double> grad_raw) {
  // theta_m = r_0 + sum_{k=1..m} exp(r_k)  =>  dL/dr_k = exp(r_k) * sum_{m>=k} dL/dtheta_m
  const std::size_t n = raw.size();
  double tail = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    tail += grad_theta[k];
    grad_raw[k] = k == 0 ? tail : std::exp(raw[k]) * tail;
  }
}

}  // namespace detail

BernsteinBasis default_basis(const UnivariateData& data, const MarginalConfig& config) {
  std::vector<double> values;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : {data.lower[i], data.upper[i]}) {
      if (std::isfinite(v)) values.push_back(v);
    }
  }
  if (values.empty()) throw std::invalid_argument("no finite values to place Bernstein bounds");
  bool log_scale = false;
  if (config.log_scale) {
    log_scale = *config.log_scale;
  } else {
    const bool positive = std::all_of(values.begin(), values.end(), [](double v) { return v > 0.0; });
    if (positive && values.size() > 2) {
      const double n = static_cast<double>(values.size());
      const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
      double m2 = 0.0;
      double m3 = 0.0;
      for (double v : values) {
        m2 += (v - mean) * (v - mean);
        m3 += (v - mean) * (v - mean) * (v - mean);
      }
      m2 /= n;
      m3 /= n;
      log_scale = m2 > 0.0 && m3 / std::pow(m2, 1.5) > 0.5;
    }
  }
  double lo = kInf;
  double hi = -kInf;
  for (double v : values) {
    if (log_scale && v <= 0.0) continue;
    const double w = log_scale ? std::log(v) : v;
    lo = std::min(lo, w);
    hi = std::max(hi, w);
  }
  if (!(hi > lo)) throw std::invalid_argument("degenerate data: all observed values are identical");
  const double pad = 0.01 * (hi - lo);
  return BernsteinBasis(config.order, config.lower.value_or(lo - pad), config.upper.value_or(hi + pad), log_scale);
}

namespace {

double link_interval(const LinkFunction& link, double a, double b) {
  if (a == -kInf && b == kInf) return 1.0;
  const double ga = link.cdf(a);
  if (ga > 0.5) return link.cdf_upper(a) - link.cdf_upper(b);
  return link.cdf(b) - ga;
}

struct MarginalProblem {
  const detail::MarginDesign& design;
  LinkFunction link;
  std::size_t width;
  std::size_t p;

  // Parameters: raw theta (width), beta (p).
  double evaluate(std::span<const double> params, std::span<double> grad) const {
    const auto raw = params.first(width);
    const auto beta = params.subspan(width, p);
    const std::vector<double> theta = coefficients_from_unconstrained(raw);
    std::vector<double> terms(design.n);
    std::vector<double> g_theta(width, 0.0);
    std::vector<double> g_beta(p, 0.0);
    const bool want_grad = !grad.empty();
    for (std::size_t i = 0; i < design.n; ++i) {
      const double lp = detail::dot(design.row_x(i), beta);
      double d_eta_total = 0.0;
      if (design.exact[i]) {
        const double eta = detail::dot(design.row_a(i), theta) - lp;
        const double hp = detail::dot(design.row_b(i), theta);
        terms[i] = link.log_pdf(eta) + std::log(hp);
        if (want_grad) {
          const double d_eta = link.dlog_pdf(eta);
          const auto a = design.row_a(i);
          const auto b = design.row_b(i);
          for (std::size_t m = 0; m < width; ++m) g_theta[m] += d_eta * a[m] + b[m] / hp;
          d_eta_total = d_eta;
        }
      } else {
        const double lo = design.lower_finite[i] ? detail::dot(design.row_a(i), theta) - lp : -kInf;
        const double hi = design.upper_finite[i] ? detail::dot(design.row_b(i), theta) - lp : kInf;
        const double mass = link_interval(link, lo, hi);
        terms[i] = std::log(mass);
        if (want_grad && mass > 0.0) {
          const double d_lo = design.lower_finite[i] ? -link.pdf(lo) / mass : 0.0;
          const double d_hi = design.upper_finite[i] ? link.pdf(hi) / mass : 0.0;
          const auto a = design.row_a(i);
          const auto b = design.row_b(i);
          for (std::size_t m = 0; m < width; ++m) {
            if (design.lower_finite[i]) g_theta[m] += d_lo * a[m];
            if (design.upper_finite[i]) g_theta[m] += d_hi * b[m];
          }
          d_eta_total = d_lo + d_hi;
        }
      }
      if (want_grad) {
        const auto xi = design.row_x(i);
        for (std::size_t j = 0; j < p; ++j) g_beta[j] -= d_eta_total * xi[j];
      }
    }
    if (want_grad) {
      detail::coefficient_gradient_to_unconstrained(raw, g_theta, grad.first(width));
      for (std::size_t j = 0; j < p; ++j) grad[width + j] = g_beta[j];
    }
    return detail::pairwise_sum(terms);
  }
};

std::vector<std::size_t> all_columns(std::size_t p) {
  std::vector<std::size_t> c(p);
  std::iota(c.begin(), c.end(), 0);
  return c;
}

}  // namespace

double marginal_loglik(const MarginalModel& model, const UnivariateData& data, std::vector<double>* gradient) {
  const auto cols = all_columns(model.beta.size());
  const auto design = detail::build_design(model.transform.basis(), data.lower, data.upper, data.x, cols, "margin");
  const std::size_t width = model.transform.basis().size();
  MarginalProblem problem{design, model.link, width, model.beta.size()};
  std::vector<double> params = unconstrained_from_coefficients(model.transform.coefficients());
  params.insert(params.end(), model.beta.begin(), model.beta.end());
  if (gradient) {
    gradient->assign(params.size(), 0.0);
    return problem.evaluate(params, *gradient);
  }
  return problem.evaluate(params, {});
}

MarginalFit fit_marginal(const UnivariateData& data, const MarginalConfig& config) {
  const std::size_t n = data.size();
  if (data.upper.size() != n || data.x.size() != n) throw std::invalid_argument("marginal data columns differ in length");
  const std::size_t p = data.covariate_names.size();
  const BernsteinBasis basis = (config.lower && config.upper)
                                   ? BernsteinBasis(config.order, *config.lower, *config.upper, config.log_scale.value_or(false))
                                   : default_basis(data, config);
  const std::size_t width = basis.size();
  if (n < width + p + 1)
    throw std::invalid_argument("marginal fit needs at least " + std::to_string(width + p + 1) + " observations");

  const auto cols = all_columns(p);
  const auto design = detail::build_design(basis, data.lower, data.upper, data.x, cols, "margin");
  std::size_t informative = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (design.exact[i] || design.lower_finite[i] || design.upper_finite[i]) ++informative;
  if (informative == 0)
    throw FitError(FitError::Kind::non_convergence, "marginal fit: no observation carries information (all intervals unbounded)");

  // Start from an affine transform standardising the observed working-scale values.
  std::vector<double> w;
  for (std::size_t i = 0; i < n; ++i) {
    for (double v : {data.lower[i], data.upper[i]}) {
      if (std::isfinite(v) && !(basis.log_scale() && v <= 0.0)) w.push_back(basis.to_working_scale(v));
    }
  }
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  double var = 0.0;
  for (double v : w) var += (v - mean) * (v - mean);
  double sd = std::sqrt(var / static_cast<double>(w.size()));
  if (!(sd > 0.0)) sd = 1.0;
  double scale = config.link == LinkKind::logit ? 1.7 : 1.0;
  const double from = scale * (basis.lower() - mean) / sd;
  const double to = scale * (basis.upper() - mean) / sd;
  const auto theta0 = linear_coefficients(basis, from, to);
  const auto raw0 = unconstrained_from_coefficients(theta0);

  MarginalProblem problem{design, LinkFunction{config.link}, width, p};
  Eigen::VectorXd x0(static_cast<Eigen::Index>(width + p));
  for (std::size_t m = 0; m < width; ++m) x0[m] = raw0[m];
  for (std::size_t j = 0; j < p; ++j) x0[width + j] = 0.0;

  const Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    std::span<const double> params(x.data(), static_cast<std::size_t>(x.size()));
    if (g) {
      g->resize(x.size());
      return problem.evaluate(params, std::span<double>(g->data(), static_cast<std::size_t>(g->size())));
    }
    return problem.evaluate(params, {});
  };
  const OptimResult opt = maximize_bfgs(objective, x0);
  if (!opt.converged)
    throw FitError(FitError::Kind::non_convergence, "marginal fit did not converge (" + opt.message +
                                                        ", gradient norm " + std::to_string(opt.gradient_norm) + ")");

  std::vector<double> raw(opt.x.data(), opt.x.data() + width);
  std::vector<double> beta(opt.x.data() + width, opt.x.data() + width + p);
  MarginalFit fit{MarginalModel{LinkFunction{config.link}, MonotoneTransform(basis, coefficients_from_unconstrained(raw)),
                                std::move(beta), data.covariate_names},
                  opt.value, opt.gradient_norm, opt.iterations, opt.trace};
  return fit;
}

KaplanMeier kaplan_meier(std::span<const double> times, const std::vector<bool>& event) {
  if (times.empty()) throw std::invalid_argument("Kaplan-Meier needs at least one observation");
  if (event.size() != times.size()) throw std::invalid_argument("times and event indicators differ in length");
  for (double t : times)
    if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("Kaplan-Meier times must be finite and >= 0");
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
  KaplanMeier km;
  double s = 1.0;
  std::size_t at_risk = times.size();
  std::size_t k = 0;
  while (k < order.size()) {
    const double t = times[order[k]];
    std::size_t deaths = 0;
    std::size_t total = 0;
    while (k + total < order.size() && times[order[k + total]] == t) {
      if (event[order[k + total]]) ++deaths;
      ++total;
    }
    if (deaths > 0) {
      s *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
      km.event_times.push_back(t);
      km.survival.push_back(s);
    }
    at_risk -= total;
    k += total;
  }
  return km;
}

KaplanMeier censoring_kaplan_meier(std::span<const double> times, const std::vector<bool>& event) {
  if (times.empty()) throw std::invalid_argument("Kaplan-Meier needs at least one observation");
  if (event.size() != times.size()) throw std::invalid_argument("times and event indicators differ in length");
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
  KaplanMeier km;
  double s = 1.0;
  std::size_t at_risk = times.size();
  std::size_t k = 0;
  while (k < order.size()) {
    const double t = times[order[k]];
    std::size_t deaths = 0;
    std::size_t total = 0;
    while (k + total < order.size() && times[order[k + total]] == t) {
      if (event[order[k + total]]) ++deaths;
      ++total;
    }
    const std::size_t censored = total - deaths;
    const std::size_t risk = at_risk - deaths;
    if (censored > 0 && risk > 0) {
      s *= 1.0 - static_cast<double>(censored) / static_cast<double>(risk);
      km.event_times.push_back(t);
      km.survival.push_back(s);
    }
    at_risk -= total;
    k += total;
  }
  return km;
}

double KaplanMeier::survival_at(double t) const {
  const auto it = std::upper_bound(event_times.begin(), event_times.end(), t);
  if (it == event_times.begin()) return 1.0;
  return survival[static_cast<std::size_t>(it - event_times.begin()) - 1];
}

double KaplanMeier::survival_before(double t) const {
  const auto it = std::lower_bound(event_times.begin(), event_times.end(), t);
  if (it == event_times.begin()) return 1.0;
  return survival[static_cast<std::size_t>(it - event_times.begin()) - 1];
}

}  // namespace npb
