#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "npb/bernstein.hpp"

namespace npb {

enum class LinkKind { probit, logit, cloglog };

std::string to_string(LinkKind kind);
LinkKind parse_link(const std::string& name);

/// Inverse link G of a transformation model F(v|x) = G(h(v) - x'beta).
/// All three kinds have log-concave densities.
struct LinkFunction {
  LinkKind kind = LinkKind::probit;

  double cdf(double eta) const;
  double cdf_upper(double eta) const;  // 1 - G(eta)
  double pdf(double eta) const;
  double log_pdf(double eta) const;
  double dlog_pdf(double eta) const;  // g'(eta) / g(eta)
  double quantile(double p) const;

  /// Gaussian-copula scale: Phi^{-1}(G(eta)).
  double latent(double eta) const;
  /// d latent / d eta given z = latent(eta).
  double latent_slope(double eta, double z) const;
};

/// F(v | x) = G(h(v) - x'beta).
struct MarginalModel {
  LinkFunction link;
  MonotoneTransform transform;
  std::vector<double> beta;
  std::vector<std::string> covariate_names;

  double linear_predictor(std::span<const double> x) const;
};

double marginal_cdf(const MarginalModel& model, double v, std::span<const double> x);

/// v with marginal_cdf(model, v, x) = p.
double marginal_quantile(const MarginalModel& model, double p, std::span<const double> x);

/// Censored univariate sample: v in (lower, upper], lower == upper means exact.
struct UnivariateData {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::vector<double>> x;  // one row per observation, columns = covariate_names
  std::vector<std::string> covariate_names;

  std::size_t size() const noexcept { return lower.size(); }
};

struct MarginalConfig {
  int order = 6;
  LinkKind link = LinkKind::probit;
  std::optional<bool> log_scale;  // unset: decide from the data
  std::optional<double> lower;    // bounds on the working scale
  std::optional<double> upper;
};

struct MarginalFit {
  MarginalModel model;
  double loglik = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  std::vector<double> trace;
};

/// Default basis for a sample: log scale for positive right-skewed data and
/// bounds at the observed range widened by 1% on each side.
BernsteinBasis default_basis(const UnivariateData& data, const MarginalConfig& config);

/// Log-likelihood of censored univariate data; optional gradient with respect to
/// the unconstrained parameters (theta_0, log increments..., beta).
double marginal_loglik(const MarginalModel& model, const UnivariateData& data, std::vector<double>* gradient = nullptr);

MarginalFit fit_marginal(const UnivariateData& data, const MarginalConfig& config = {});

/// Log increment standing in for a zero increment: exp() of it is the smallest
/// subnormal double, which vanishes when added to any coefficient of usual size.
inline constexpr double kZeroIncrementLog = -744.4400719213812;

/// Reparameterisation theta_m = theta_{m-1} + exp(r_m).
std::vector<double> coefficients_from_unconstrained(std::span<const double> raw);
std::vector<double> unconstrained_from_coefficients(std::span<const double> theta);

/// Product-limit estimator. At tied times deaths are processed before censorings.
struct KaplanMeier {
  std::vector<double> event_times;  // distinct event times, increasing
  std::vector<double> survival;     // S just after each event time

  double survival_at(double t) const;       // S(t), right-continuous
  double survival_before(double t) const;   // S(t-)
  double cdf(double t) const { return 1.0 - survival_at(t); }
};

KaplanMeier kaplan_meier(std::span<const double> times, const std::vector<bool>& event);

/// Product-limit estimate of the censoring survivor function P(C > t); at tied
/// times deaths leave the risk set before censorings are counted.
KaplanMeier censoring_kaplan_meier(std::span<const double> times, const std::vector<bool>& event);

}  // namespace npb
