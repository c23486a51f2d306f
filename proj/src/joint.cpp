#include "npb/joint.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "design.hpp"
#include "npb/bvn.hpp"
#include "npb/errors.hpp"
#include "npb/normal.hpp"
#include "npb/rng.hpp"

namespace npb {

bool Observation::right_censored() const noexcept { return t_upper == kInf && t_lower < kInf; }

Observation Observation::exact(double y, double t, std::vector<double> x) { return {y, y, t, t, std::move(x)}; }

Observation Observation::censored(double y, double t_lower, std::vector<double> x) {
  return {y, y, t_lower, kInf, std::move(x)};
}

void validate_observations(std::span<const Observation> data, std::size_t covariates) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Observation& o = data[i];
    auto fail = [i](const std::string& msg) {
      throw std::invalid_argument("observation " + std::to_string(i) + ": " + msg);
    };
    if (std::isnan(o.y_lower) || std::isnan(o.y_upper) || std::isnan(o.t_lower) || std::isnan(o.t_upper))
      fail("NaN bound");
    if (o.y_lower > o.y_upper) fail("y_lower > y_upper");
    if (o.t_lower > o.t_upper) fail("t_lower > t_upper");
    if (o.t_lower < 0.0) fail("negative event time");
    if (!std::isfinite(o.y_lower) && !std::isfinite(o.y_upper)) fail("biomarker interval has no finite bound");
    if (!std::isfinite(o.t_lower) && !std::isfinite(o.t_upper)) fail("time interval has no finite bound");
    if (o.x.size() != covariates)
      fail("has " + std::to_string(o.x.size()) + " covariates, expected " + std::to_string(covariates));
    for (double v : o.x)
      if (!std::isfinite(v)) fail("missing or non-finite covariate");
  }
}

double rho_from_lambda(double lambda) {
  if (std::isnan(lambda)) throw std::invalid_argument("lambda is NaN");
  return -lambda / std::sqrt(lambda * lambda + 1.0);
}

double lambda_from_rho(double rho) {
  if (!(rho > -1.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (-1, 1)");
  return -rho / std::sqrt(1.0 - rho * rho);
}

namespace {

std::vector<std::size_t> lookup_columns(const std::vector<std::string>& wanted, const std::vector<std::string>& all,
                                        const char* what) {
  std::vector<std::size_t> cols;
  for (const auto& name : wanted) {
    const auto it = std::find(all.begin(), all.end(), name);
    if (it == all.end()) throw std::invalid_argument(std::string(what) + " covariate '" + name + "' is not in the data");
    cols.push_back(static_cast<std::size_t>(it - all.begin()));
  }
  return cols;
}

std::vector<double> pick(std::span<const double> x, const std::vector<std::size_t>& cols) {
  std::vector<double> out(cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) out[j] = x[cols[j]];
  return out;
}

// Latent normal score of a margin at v, with +-inf and the log-scale lower end handled.
double latent_at(const MarginalModel& m, double v, std::span<const double> x) {
  if (std::isnan(v)) throw std::invalid_argument("NaN value");
  if (v == kInf || v == -kInf) return v;
  if (m.transform.basis().log_scale() && v <= 0.0) return -kInf;
  return m.link.latent(m.transform(v) - m.linear_predictor(x));
}

}  // namespace

NpbModel::NpbModel(MarginalModel margin_y, MarginalModel margin_t, Dependence dependence,
                   std::vector<std::string> covariate_names)
    : margin_y_(std::move(margin_y)),
      margin_t_(std::move(margin_t)),
      dependence_(std::move(dependence)),
      covariate_names_(std::move(covariate_names)) {
  if (margin_y_.beta.size() != margin_y_.covariate_names.size() ||
      margin_t_.beta.size() != margin_t_.covariate_names.size())
    throw std::invalid_argument("margin coefficients and covariate names differ in length");
  columns_y_ = lookup_columns(margin_y_.covariate_names, covariate_names_, "biomarker");
  columns_t_ = lookup_columns(margin_t_.covariate_names, covariate_names_, "event-time");
  if (dependence_.form == Dependence::Form::constant) {
    if (!dependence_.gamma.empty() || !dependence_.covariate_names.empty())
      throw std::invalid_argument("constant dependence takes no covariates");
  } else {
    if (dependence_.gamma.size() != dependence_.covariate_names.size())
      throw std::invalid_argument("dependence coefficients and covariate names differ in length");
    columns_dep_ = lookup_columns(dependence_.covariate_names, covariate_names_, "dependence");
  }
  if (!std::isfinite(dependence_.alpha)) throw std::invalid_argument("non-finite dependence parameter");
  for (double g : dependence_.gamma)
    if (!std::isfinite(g)) throw std::invalid_argument("non-finite dependence parameter");
}

void NpbModel::check_x(std::span<const double> x) const {
  if (x.size() != covariate_names_.size())
    throw std::invalid_argument("covariate vector has " + std::to_string(x.size()) + " entries, model expects " +
                                std::to_string(covariate_names_.size()));
}

double NpbModel::lambda(std::span<const double> x) const {
  if (dependence_.form == Dependence::Form::constant) return dependence_.alpha;
  check_x(x);
  double l = dependence_.alpha;
  for (std::size_t j = 0; j < columns_dep_.size(); ++j) l += dependence_.gamma[j] * x[columns_dep_[j]];
  return l;
}

std::vector<double> NpbModel::covariates_y(std::span<const double> x) const {
  check_x(x);
  return pick(x, columns_y_);
}

std::vector<double> NpbModel::covariates_t(std::span<const double> x) const {
  check_x(x);
  return pick(x, columns_t_);
}

double NpbModel::cdf_y(double y, std::span<const double> x) const { return marginal_cdf(margin_y_, y, covariates_y(x)); }
double NpbModel::cdf_t(double t, std::span<const double> x) const { return marginal_cdf(margin_t_, t, covariates_t(x)); }
double NpbModel::latent_y(double y, std::span<const double> x) const { return latent_at(margin_y_, y, covariates_y(x)); }
double NpbModel::latent_t(double t, std::span<const double> x) const { return latent_at(margin_t_, t, covariates_t(x)); }

double NpbModel::quantile_y(double p, std::span<const double> x) const {
  return marginal_quantile(margin_y_, p, covariates_y(x));
}

double NpbModel::quantile_t(double p, std::span<const double> x) const {
  return marginal_quantile(margin_t_, p, covariates_t(x));
}

double NpbModel::joint_cdf(double y, double t, std::span<const double> x) const {
  return bvn_cdf(latent_y(y, x), latent_t(t, x), rho(x));
}

std::size_t NpbModel::parameter_count() const {
  return margin_y_.transform.basis().size() + margin_t_.transform.basis().size() + margin_y_.beta.size() +
         margin_t_.beta.size() + 1 + dependence_.gamma.size();
}

std::vector<double> NpbModel::parameters() const {
  std::vector<double> p = unconstrained_from_coefficients(margin_y_.transform.coefficients());
  const auto rt = unconstrained_from_coefficients(margin_t_.transform.coefficients());
  p.insert(p.end(), rt.begin(), rt.end());
  p.insert(p.end(), margin_y_.beta.begin(), margin_y_.beta.end());
  p.insert(p.end(), margin_t_.beta.begin(), margin_t_.beta.end());
  p.push_back(dependence_.alpha);
  p.insert(p.end(), dependence_.gamma.begin(), dependence_.gamma.end());
  return p;
}

std::vector<std::string> NpbModel::parameter_names() const {
  std::vector<std::string> names;
  auto add_margin = [&](const MarginalModel& m, const char* tag) {
    const std::size_t w = m.transform.basis().size();
    names.push_back(std::string(tag) + ".theta0");
    for (std::size_t k = 1; k < w; ++k) names.push_back(std::string(tag) + ".log_increment" + std::to_string(k));
  };
  add_margin(margin_y_, "y");
  add_margin(margin_t_, "t");
  for (const auto& c : margin_y_.covariate_names) names.push_back("y.beta[" + c + "]");
  for (const auto& c : margin_t_.covariate_names) names.push_back("t.beta[" + c + "]");
  if (dependence_.form == Dependence::Form::constant) {
    names.emplace_back("lambda");
  } else {
    names.emplace_back("alpha");
    for (const auto& c : dependence_.covariate_names) names.push_back("gamma[" + c + "]");
  }
  return names;
}

NpbModel NpbModel::with_parameters(std::span<const double> params) const {
  if (params.size() != parameter_count())
    throw std::invalid_argument("parameter vector has " + std::to_string(params.size()) + " entries, model expects " +
                                std::to_string(parameter_count()));
  const std::size_t wy = margin_y_.transform.basis().size();
  const std::size_t wt = margin_t_.transform.basis().size();
  const std::size_t py = margin_y_.beta.size();
  const std::size_t pt = margin_t_.beta.size();
  std::size_t k = 0;
  MarginalModel my = margin_y_;
  MarginalModel mt = margin_t_;
  my.transform = MonotoneTransform(margin_y_.transform.basis(), coefficients_from_unconstrained(params.subspan(k, wy)));
  k += wy;
  mt.transform = MonotoneTransform(margin_t_.transform.basis(), coefficients_from_unconstrained(params.subspan(k, wt)));
  k += wt;
  my.beta.assign(params.begin() + static_cast<std::ptrdiff_t>(k), params.begin() + static_cast<std::ptrdiff_t>(k + py));
  k += py;
  mt.beta.assign(params.begin() + static_cast<std::ptrdiff_t>(k), params.begin() + static_cast<std::ptrdiff_t>(k + pt));
  k += pt;
  Dependence dep = dependence_;
  dep.alpha = params[k++];
  for (double& g : dep.gamma) g = params[k++];
  return NpbModel(std::move(my), std::move(mt), std::move(dep), covariate_names_);
}

namespace {

// dL/d(eta) at each evaluated point of one row, plus dL/d(rho).
struct RowPartials {
  double y_a = 0.0;
  double y_b = 0.0;
  double t_a = 0.0;
  double t_b = 0.0;
  double rho = 0.0;
};

double log_slope(const detail::MarginPoint& p, const LinkFunction& link) {
  if (link.kind == LinkKind::probit) return 0.0;
  return link.log_pdf(p.eta) - norm_log_pdf(p.z);
}

// Chain from dL/dz to dL/deta at an exact point, including d log(dz/deta) / d eta.
double exact_eta_partial(const detail::MarginPoint& p, const LinkFunction& link, double dz) {
  if (link.kind == LinkKind::probit) return dz;
  return dz * p.slope + link.dlog_pdf(p.eta) + p.z * p.slope;
}

double interval_eta_partial(const detail::MarginPoint& p, double dz) {
  if (std::isinf(p.z) || dz == 0.0) return 0.0;
  return dz * p.slope;
}

// Exact coordinate z with the other coordinate in (a, b]:
// log phi(z) + log[Phi(B) - Phi(A)], A = (a - rho z)/s.
double strip_term(double z, double a, double b, double rho, double s, double* dz, double* da, double* db, double* drho) {
  const double lo = std::isinf(a) ? a : (a - rho * z) / s;
  const double hi = std::isinf(b) ? b : (b - rho * z) / s;
  const double mass = norm_interval(lo, hi);
  const double value = norm_log_pdf(z) + std::log(mass);
  if (dz && mass > 0.0) {
    const double fa = norm_pdf(lo);
    const double fb = norm_pdf(hi);
    *dz = -z - (rho / s) * (fb - fa) / mass;
    *da = std::isinf(a) ? 0.0 : -fa / (s * mass);
    *db = std::isinf(b) ? 0.0 : fb / (s * mass);
    const double s3 = s * s * s;
    double r = 0.0;
    if (!std::isinf(b)) r += fb * (rho * b - z);
    if (!std::isinf(a)) r -= fa * (rho * a - z);
    *drho = r / (s3 * mass);
  }
  return value;
}

double corner_density(double z1, double z2, double rho) {
  if (std::isinf(z1) || std::isinf(z2)) return 0.0;
  return bvn_pdf(z1, z2, rho);
}

double row_contribution(const detail::MarginRow& ry, const detail::MarginRow& rt, const LinkFunction& ly,
                        const LinkFunction& lt, double rho, double s, RowPartials* d) {
  if (ry.exact && rt.exact) {
    const double z1 = ry.a.z;
    const double z2 = rt.a.z;
    const double s2 = s * s;
    const double q = z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2;
    const double value = -std::log(2.0 * std::numbers::pi) - std::log(s) - 0.5 * q / s2 + log_slope(ry.a, ly) +
                         log_slope(rt.a, lt) + std::log(ry.hprime) + std::log(rt.hprime);
    if (d) {
      d->y_a = exact_eta_partial(ry.a, ly, -(z1 - rho * z2) / s2);
      d->t_a = exact_eta_partial(rt.a, lt, -(z2 - rho * z1) / s2);
      d->rho = rho / s2 + (z1 * z2 * s2 - rho * q) / (s2 * s2);
    }
    return value;
  }
  if (ry.exact || rt.exact) {
    const bool y_exact = ry.exact;
    const detail::MarginRow& ex = y_exact ? ry : rt;
    const detail::MarginRow& iv = y_exact ? rt : ry;
    const LinkFunction& lex = y_exact ? ly : lt;
    double dz = 0.0, da = 0.0, db = 0.0, dr = 0.0;
    const double value = strip_term(ex.a.z, iv.a.z, iv.b.z, rho, s, d ? &dz : nullptr, &da, &db, &dr) +
                         log_slope(ex.a, lex) + std::log(ex.hprime);
    if (d) {
      const double e = exact_eta_partial(ex.a, lex, dz);
      const double ia = interval_eta_partial(iv.a, da);
      const double ib = interval_eta_partial(iv.b, db);
      if (y_exact) {
        d->y_a = e;
        d->t_a = ia;
        d->t_b = ib;
      } else {
        d->t_a = e;
        d->y_a = ia;
        d->y_b = ib;
      }
      d->rho = dr;
    }
    return value;
  }
  const double a1 = ry.a.z, b1 = ry.b.z, a2 = rt.a.z, b2 = rt.b.z;
  const double mass = rectangle_probability(a1, b1, a2, b2, rho);
  if (d && mass > 0.0) {
    // d/d(bound) of the rectangle: density of the bound times the conditional mass of the other side.
    auto side = [&](double bound, double lo, double hi) {
      if (std::isinf(bound)) return 0.0;
      const double l = std::isinf(lo) ? lo : (lo - rho * bound) / s;
      const double h = std::isinf(hi) ? hi : (hi - rho * bound) / s;
      return norm_pdf(bound) * norm_interval(l, h) / mass;
    };
    d->y_a = interval_eta_partial(ry.a, -side(a1, a2, b2));
    d->y_b = interval_eta_partial(ry.b, side(b1, a2, b2));
    d->t_a = interval_eta_partial(rt.a, -side(a2, a1, b1));
    d->t_b = interval_eta_partial(rt.b, side(b2, a1, b1));
    d->rho = (corner_density(b1, b2, rho) - corner_density(a1, b2, rho) - corner_density(b1, a2, rho) +
              corner_density(a1, a2, rho)) /
             mass;
  }
  return std::log(mass);
}

struct JointDesign {
  detail::MarginDesign y;
  detail::MarginDesign t;
  std::size_t q = 0;       // dependence covariates
  std::vector<double> xd;  // n * q
};

JointDesign build_joint_design(const NpbModel& model, std::span<const Observation> data) {
  if (data.empty()) throw std::invalid_argument("no observations");
  validate_observations(data, model.covariate_names().size());
  const std::size_t n = data.size();
  std::vector<double> yl(n), yu(n), tl(n), tu(n);
  std::vector<std::vector<double>> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    yl[i] = data[i].y_lower;
    yu[i] = data[i].y_upper;
    tl[i] = data[i].t_lower;
    tu[i] = data[i].t_upper;
    x[i] = data[i].x;
  }
  JointDesign d;
  d.y = detail::build_design(model.margin_y().transform.basis(), yl, yu, x, model.columns_y(), "biomarker");
  d.t = detail::build_design(model.margin_t().transform.basis(), tl, tu, x, model.columns_t(), "event time");
  const auto& cols = model.columns_dependence();
  d.q = cols.size();
  d.xd.resize(n * d.q);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d.q; ++j) d.xd[i * d.q + j] = x[i][cols[j]];
  return d;
}

class JointProblem {
 public:
  JointProblem(const JointDesign& design, LinkFunction ly, LinkFunction lt)
      : d_(design), ly_(ly), lt_(lt), wy_(design.y.width), wt_(design.t.width), py_(design.y.p), pt_(design.t.p) {}

  std::size_t size() const { return wy_ + wt_ + py_ + pt_ + 1 + d_.q; }

  // Per-row log-likelihood terms; gradient (if non-empty) receives the score.
  void evaluate(std::span<const double> params, std::vector<double>& terms, std::span<double> grad) const {
    std::size_t k = 0;
    const auto raw_y = params.subspan(k, wy_);
    k += wy_;
    const auto raw_t = params.subspan(k, wt_);
    k += wt_;
    const auto beta_y = params.subspan(k, py_);
    k += py_;
    const auto beta_t = params.subspan(k, pt_);
    k += pt_;
    const double alpha = params[k];
    const auto gamma = params.subspan(k + 1, d_.q);
    const auto theta_y = coefficients_from_unconstrained(raw_y);
    const auto theta_t = coefficients_from_unconstrained(raw_t);

    const bool want = !grad.empty();
    std::vector<double> g_ty(wy_, 0.0), g_tt(wt_, 0.0), g_by(py_, 0.0), g_bt(pt_, 0.0), g_dep(1 + d_.q, 0.0);
    terms.assign(d_.y.n, 0.0);
    for (std::size_t i = 0; i < d_.y.n; ++i) {
      const auto ry = detail::evaluate_row(d_.y, i, ly_, theta_y, beta_y);
      const auto rt = detail::evaluate_row(d_.t, i, lt_, theta_t, beta_t);
      double lambda = alpha;
      const std::span<const double> xd(d_.xd.data() + i * d_.q, d_.q);
      for (std::size_t j = 0; j < d_.q; ++j) lambda += gamma[j] * xd[j];
      const double s = 1.0 / std::sqrt(lambda * lambda + 1.0);
      const double rho = -lambda * s;
      if ((ry.exact && !(ry.hprime > 0.0)) || (rt.exact && !(rt.hprime > 0.0))) {
        terms[i] = -kInf;
        continue;
      }
      RowPartials p;
      terms[i] = row_contribution(ry, rt, ly_, lt_, rho, s, want ? &p : nullptr);
      if (!want || !std::isfinite(terms[i])) continue;
      accumulate(d_.y, i, ry, p.y_a, p.y_b, g_ty, g_by);
      accumulate(d_.t, i, rt, p.t_a, p.t_b, g_tt, g_bt);
      const double dl = p.rho * -(s * s * s);
      g_dep[0] += dl;
      for (std::size_t j = 0; j < d_.q; ++j) g_dep[1 + j] += dl * xd[j];
    }
    if (!want) return;
    k = 0;
    detail::coefficient_gradient_to_unconstrained(raw_y, g_ty, grad.subspan(k, wy_));
    k += wy_;
    detail::coefficient_gradient_to_unconstrained(raw_t, g_tt, grad.subspan(k, wt_));
    k += wt_;
    for (double v : g_by) grad[k++] = v;
    for (double v : g_bt) grad[k++] = v;
    for (double v : g_dep) grad[k++] = v;
  }

 private:
  static void accumulate(const detail::MarginDesign& d, std::size_t i, const detail::MarginRow& r, double da, double db,
                         std::vector<double>& g_theta, std::vector<double>& g_beta) {
    const auto a = d.row_a(i);
    const auto b = d.row_b(i);
    double total = 0.0;
    if (r.exact) {
      for (std::size_t m = 0; m < d.width; ++m) g_theta[m] += da * a[m] + b[m] / r.hprime;
      total = da;
    } else {
      if (d.lower_finite[i] && da != 0.0)
        for (std::size_t m = 0; m < d.width; ++m) g_theta[m] += da * a[m];
      if (d.upper_finite[i] && db != 0.0)
        for (std::size_t m = 0; m < d.width; ++m) g_theta[m] += db * b[m];
      total = da + db;
    }
    const auto x = d.row_x(i);
    for (std::size_t j = 0; j < d.p; ++j) g_beta[j] -= total * x[j];
  }

  const JointDesign& d_;
  LinkFunction ly_;
  LinkFunction lt_;
  std::size_t wy_, wt_, py_, pt_;
};

void check_terms(const std::vector<double>& terms) {
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (!std::isfinite(terms[i]))
      throw NumericError("observation " + std::to_string(i) +
                         " has zero likelihood (empty probability mass or zero density)");
  }
}

std::vector<double> evaluate_terms(const NpbModel& model, std::span<const Observation> data, std::vector<double>* grad) {
  const JointDesign design = build_joint_design(model, data);
  const JointProblem problem(design, model.margin_y().link, model.margin_t().link);
  const std::vector<double> params = model.parameters();
  std::vector<double> terms;
  if (grad) {
    grad->assign(problem.size(), 0.0);
    problem.evaluate(params, terms, *grad);
  } else {
    problem.evaluate(params, terms, {});
  }
  check_terms(terms);
  return terms;
}

}  // namespace

double loglik_exact(const NpbModel& model, const Observation& obs) {
  if (!obs.y_exact() || !obs.t_exact()) throw std::invalid_argument("loglik_exact needs exact biomarker and event time");
  return evaluate_terms(model, std::span<const Observation>(&obs, 1), nullptr)[0];
}

double loglik_censored(const NpbModel& model, const Observation& obs) {
  if (obs.y_exact() && obs.t_exact()) throw std::invalid_argument("loglik_censored needs an interval-valued coordinate");
  return evaluate_terms(model, std::span<const Observation>(&obs, 1), nullptr)[0];
}

std::vector<double> loglik_contributions(const NpbModel& model, std::span<const Observation> data) {
  return evaluate_terms(model, data, nullptr);
}

double loglik(const NpbModel& model, std::span<const Observation> data) {
  const auto terms = evaluate_terms(model, data, nullptr);
  return detail::pairwise_sum(terms);
}

std::vector<double> score(const NpbModel& model, std::span<const Observation> data) {
  std::vector<double> grad;
  evaluate_terms(model, data, &grad);
  return grad;
}

Eigen::MatrixXd numeric_hessian(const NpbModel& model, std::span<const Observation> data) {
  const JointDesign design = build_joint_design(model, data);
  const JointProblem problem(design, model.margin_y().link, model.margin_t().link);
  const std::vector<double> theta = model.parameters();
  const std::size_t k = theta.size();
  Eigen::MatrixXd h(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  std::vector<double> terms;
  std::vector<double> gp(k), gm(k);
  for (std::size_t j = 0; j < k; ++j) {
    const double step = 1e-4 * (1.0 + std::abs(theta[j]));
    std::vector<double> p = theta;
    p[j] = theta[j] + step;
    problem.evaluate(p, terms, gp);
    check_terms(terms);
    p[j] = theta[j] - step;
    problem.evaluate(p, terms, gm);
    check_terms(terms);
    for (std::size_t i = 0; i < k; ++i)
      h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (gp[i] - gm[i]) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

std::vector<std::size_t> boundary_parameters(const NpbModel& model) {
  std::vector<std::size_t> out;
  std::size_t offset = 0;
  for (const MarginalModel* m : {&model.margin_y(), &model.margin_t()}) {
    const auto& theta = m->transform.coefficients();
    const double range = theta.back() - theta.front();
    for (std::size_t k = 1; k < theta.size(); ++k)
      if (theta[k] - theta[k - 1] <= 1e-3 * range) out.push_back(offset + k);
    offset += theta.size();
  }
  return out;
}

Eigen::MatrixXd covariance_from_hessian(const Eigen::MatrixXd& hessian, const std::vector<std::size_t>& fixed) {
  const Eigen::Index k = hessian.rows();
  std::vector<Eigen::Index> free;
  for (Eigen::Index j = 0; j < k; ++j)
    if (std::find(fixed.begin(), fixed.end(), static_cast<std::size_t>(j)) == fixed.end()) free.push_back(j);
  const auto f = static_cast<Eigen::Index>(free.size());
  Eigen::MatrixXd info(f, f);
  for (Eigen::Index a = 0; a < f; ++a)
    for (Eigen::Index b = 0; b < f; ++b) info(a, b) = -0.5 * (hessian(free[a], free[b]) + hessian(free[b], free[a]));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
  const double hi = eig.eigenvalues().maxCoeff();
  const double lo = eig.eigenvalues().minCoeff();
  if (!(hi > 0.0) || !(lo > 1e-8 * hi))
    throw FitError(FitError::Kind::singular_hessian, "observed information is singular or indefinite (eigenvalues " +
                                                         std::to_string(lo) + " .. " + std::to_string(hi) +
                                                         "); confidence intervals withheld");
  const Eigen::MatrixXd& v = eig.eigenvectors();
  const Eigen::MatrixXd inv = v * eig.eigenvalues().cwiseInverse().asDiagonal() * v.transpose();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index a = 0; a < f; ++a)
    for (Eigen::Index b = 0; b < f; ++b) cov(free[a], free[b]) = 0.5 * (inv(a, b) + inv(b, a));
  return cov;
}

FitResult fit(std::span<const Observation> data, const FitConfig& config) {
  if (data.empty()) throw std::invalid_argument("no observations");
  validate_observations(data, config.covariate_names.size());
  const std::size_t n = data.size();

  auto margin_data = [&](bool biomarker, const std::vector<std::string>& names) {
    const auto cols = lookup_columns(names, config.covariate_names, biomarker ? "biomarker" : "event-time");
    UnivariateData u;
    u.covariate_names = names;
    for (const auto& o : data) {
      u.lower.push_back(biomarker ? o.y_lower : o.t_lower);
      u.upper.push_back(biomarker ? o.y_upper : o.t_upper);
      u.x.push_back(pick(o.x, cols));
    }
    return u;
  };

  // Stage 1: margins on their own.
  const MarginalFit fy = fit_marginal(margin_data(true, config.covariates_y), config.margin_y);
  const MarginalFit ft = fit_marginal(margin_data(false, config.covariates_t), config.margin_t);

  Dependence dep;
  dep.form = config.dependence;
  if (dep.form == Dependence::Form::covariate) {
    dep.covariate_names = config.covariates_dependence;
    dep.gamma.assign(dep.covariate_names.size(), 0.0);
  } else if (!config.covariates_dependence.empty()) {
    throw std::invalid_argument("constant dependence takes no covariates");
  }
  const NpbModel start(fy.model, ft.model, dep, config.covariate_names);
  const std::size_t k = start.parameter_count();
  if (n <= k)
    throw std::invalid_argument("sample size " + std::to_string(n) + " does not exceed the parameter count " +
                                std::to_string(k));

  // Stage 2: everything jointly from the marginal estimates and lambda = 0.
  const JointDesign design = build_joint_design(start, data);
  const JointProblem problem(design, start.margin_y().link, start.margin_t().link);
  const Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    const std::span<const double> params(x.data(), static_cast<std::size_t>(x.size()));
    std::vector<double> local_terms;
    if (g) {
      g->resize(x.size());
      problem.evaluate(params, local_terms, std::span<double>(g->data(), static_cast<std::size_t>(g->size())));
    } else {
      problem.evaluate(params, local_terms, {});
    }
    return detail::pairwise_sum(local_terms);
  };
  const std::vector<double> p0 = start.parameters();
  const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(p0.data(), static_cast<Eigen::Index>(k));
  const OptimResult opt = maximize_bfgs(objective, x0, config.optim);
  if (!opt.converged || !std::isfinite(opt.value))
    throw FitError(FitError::Kind::non_convergence, "joint fit did not converge (" + opt.message + ", gradient norm " +
                                                        std::to_string(opt.gradient_norm) + ")");

  const std::vector<double> best(opt.x.data(), opt.x.data() + k);
  FitResult result{start.with_parameters(best), opt.value, opt.gradient_norm, {}, start.parameter_names(), {}};
  result.report.iterations = opt.iterations;
  result.report.message = opt.message;
  result.report.stage1_loglik = fy.loglik + ft.loglik;
  result.report.trace = opt.trace;

  result.report.boundary_parameters = boundary_parameters(result.model);
  if (config.compute_covariance)
    result.covariance = covariance_from_hessian(numeric_hessian(result.model, data), result.report.boundary_parameters);
  return result;
}

namespace {
double two_sided_quantile(double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must lie in (0, 1)");
  return norm_quantile(0.5 + 0.5 * level);
}

void require_covariance(const FitResult& fit) {
  if (!fit.has_covariance()) throw NumericError("no covariance available (singular Hessian or not computed)");
}
}  // namespace

Interval wald_interval(const FitResult& fit, std::size_t k, double level) {
  require_covariance(fit);
  const auto theta = fit.model.parameters();
  if (k >= theta.size()) throw std::out_of_range("parameter index out of range");
  const double z = two_sided_quantile(level);
  const double se = std::sqrt(fit.covariance(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)));
  return {theta[k], theta[k] - z * se, theta[k] + z * se};
}

Interval rho_interval(const FitResult& fit, std::span<const double> x, double level) {
  require_covariance(fit);
  const NpbModel& m = fit.model;
  const auto k0 = static_cast<Eigen::Index>(m.parameter_count() - 1 - m.dependence().gamma.size());
  const auto q = static_cast<Eigen::Index>(m.dependence().gamma.size());
  Eigen::VectorXd g = Eigen::VectorXd::Ones(q + 1);
  if (q > 0) {
    if (x.size() != m.covariate_names().size()) throw std::invalid_argument("covariate vector has the wrong length");
    for (Eigen::Index j = 0; j < q; ++j) g[j + 1] = x[m.columns_dependence()[static_cast<std::size_t>(j)]];
  }
  const Eigen::MatrixXd sub = fit.covariance.block(k0, k0, q + 1, q + 1);
  const double se = std::sqrt(g.dot(sub * g));
  const double lam = m.lambda(x);
  const double z = two_sided_quantile(level);
  // rho is decreasing in lambda.
  return {rho_from_lambda(lam), rho_from_lambda(lam + z * se), rho_from_lambda(lam - z * se)};
}

std::vector<Interval> functional_intervals(const FitResult& fit, const Functional& functional, double level,
                                           std::size_t draws, std::uint64_t seed) {
  require_covariance(fit);
  if (draws < 2) throw std::invalid_argument("need at least two parameter draws");
  const double alpha = 0.5 * (1.0 - level);
  two_sided_quantile(level);
  const std::vector<double> estimate = functional(fit.model);
  const std::size_t dim = estimate.size();
  // Draws are taken on the coefficient scale (delta-method covariance): small
  // Bernstein increments have very wide log-scale intervals, and exponentiating
  // such draws produces transforms far from anything the data support.
  const NpbModel& m = fit.model;
  const std::vector<double> theta = m.parameters();
  const auto k = static_cast<Eigen::Index>(theta.size());
  const std::size_t wy = m.margin_y().transform.basis().size();
  const std::size_t wt = m.margin_t().transform.basis().size();
  Eigen::VectorXd centre(k);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(k, k);
  auto margin_block = [&](std::size_t off, std::size_t w, const std::vector<double>& coef) {
    for (std::size_t j = 0; j < w; ++j) {
      centre[static_cast<Eigen::Index>(off + j)] = coef[j];
      for (std::size_t i = 0; i <= j; ++i)
        jac(static_cast<Eigen::Index>(off + j), static_cast<Eigen::Index>(off + i)) =
            i == 0 ? 1.0 : std::exp(theta[off + i]);
    }
  };
  margin_block(0, wy, m.margin_y().transform.coefficients());
  margin_block(wy, wt, m.margin_t().transform.coefficients());
  for (Eigen::Index j = static_cast<Eigen::Index>(wy + wt); j < k; ++j) centre[j] = theta[static_cast<std::size_t>(j)];
  const Eigen::MatrixXd cov = jac * fit.covariance * jac.transpose();

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (cov + cov.transpose()));
  const Eigen::MatrixXd root =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  // coefficient vector -> model; decreasing steps are projected to ties
  auto model_at = [&](const Eigen::VectorXd& c) {
    auto transform = [&](const MarginalModel& mm, std::size_t off, std::size_t w) {
      std::vector<double> coef(w);
      for (std::size_t j = 0; j < w; ++j) coef[j] = c[static_cast<Eigen::Index>(off + j)];
      for (std::size_t j = 1; j < w; ++j) coef[j] = std::max(coef[j], coef[j - 1]);
      return MonotoneTransform(mm.transform.basis(), coef);
    };
    MarginalModel my = m.margin_y();
    MarginalModel mt = m.margin_t();
    my.transform = transform(my, 0, wy);
    mt.transform = transform(mt, wy, wt);
    auto j = static_cast<Eigen::Index>(wy + wt);
    for (double& b : my.beta) b = c[j++];
    for (double& b : mt.beta) b = c[j++];
    Dependence dep = m.dependence();
    dep.alpha = c[j++];
    for (double& g : dep.gamma) g = c[j++];
    return NpbModel(std::move(my), std::move(mt), std::move(dep), m.covariate_names());
  };

  Philox rng(seed, streams::kParameterDraws);
  std::vector<std::vector<double>> samples(dim);
  Eigen::VectorXd e(k);
  for (std::size_t s = 0; s < draws; ++s) {
    for (Eigen::Index j = 0; j < k; ++j) e[j] = rng.normal();
    const Eigen::VectorXd c = centre + root * e;
    std::vector<double> value;
    try {
      value = functional(model_at(c));
    } catch (const std::exception&) {
      continue;  // a draw outside the usable region is dropped
    }
    if (value.size() != dim) throw std::logic_error("functional returned a vector of varying length");
    for (std::size_t d = 0; d < dim; ++d)
      if (std::isfinite(value[d])) samples[d].push_back(value[d]);
  }

  auto quantile = [](std::vector<double>& v, double prob) {
    const double h = prob * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  std::vector<Interval> out(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    auto& v = samples[d];
    if (v.size() < 2) throw NumericError("functional could not be evaluated at the parameter draws");
    std::sort(v.begin(), v.end());
    const double est = estimate[d];
    out[d] = {est, std::min(quantile(v, alpha), est), std::max(quantile(v, 1.0 - alpha), est)};
  }
  return out;
}

}  // namespace npb
