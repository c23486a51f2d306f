#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "npb/margins.hpp"
#include "npb/optim.hpp"

namespace npb {

/// One subject: biomarker in (y_lower, y_upper], event time in (t_lower, t_upper].
/// Equal bounds mean an exact value; t_upper = +inf is right-censoring and
/// y_lower = -inf / y_upper = +inf encode detection limits.
struct Observation {
  double y_lower = 0.0;
  double y_upper = 0.0;
  double t_lower = 0.0;
  double t_upper = 0.0;
  std::vector<double> x;

  bool y_exact() const noexcept { return y_lower == y_upper; }
  bool t_exact() const noexcept { return t_lower == t_upper; }
  bool right_censored() const noexcept;

  static Observation exact(double y, double t, std::vector<double> x = {});
  static Observation censored(double y, double t_lower, std::vector<double> x = {});
};

/// Throws std::invalid_argument naming the first offending row.
void validate_observations(std::span<const Observation> data, std::size_t covariates);

/// Gaussian-copula dependence through the inverse-Cholesky coefficient
/// lambda(x) = alpha + x'gamma, rho(x) = -lambda / sqrt(lambda^2 + 1).
struct Dependence {
  enum class Form { constant, covariate };
  Form form = Form::constant;
  double alpha = 0.0;  // lambda itself in the constant form
  std::vector<double> gamma;
  std::vector<std::string> covariate_names;
};

double rho_from_lambda(double lambda);
double lambda_from_rho(double rho);

class NpbModel {
 public:
  /// covariate_names fixes the order of Observation::x; each margin and the
  /// dependence pick their covariates from it by name.
  NpbModel(MarginalModel margin_y, MarginalModel margin_t, Dependence dependence,
           std::vector<std::string> covariate_names);

  const MarginalModel& margin_y() const noexcept { return margin_y_; }
  const MarginalModel& margin_t() const noexcept { return margin_t_; }
  const Dependence& dependence() const noexcept { return dependence_; }
  const std::vector<std::string>& covariate_names() const noexcept { return covariate_names_; }
  const std::vector<std::size_t>& columns_y() const noexcept { return columns_y_; }
  const std::vector<std::size_t>& columns_t() const noexcept { return columns_t_; }
  const std::vector<std::size_t>& columns_dependence() const noexcept { return columns_dep_; }

  double lambda(std::span<const double> x) const;
  double rho(std::span<const double> x) const { return rho_from_lambda(lambda(x)); }

  std::vector<double> covariates_y(std::span<const double> x) const;
  std::vector<double> covariates_t(std::span<const double> x) const;

  double cdf_y(double y, std::span<const double> x) const;
  double cdf_t(double t, std::span<const double> x) const;
  /// Phi^{-1}(F(v | x)); +-inf at the ends of the support.
  double latent_y(double y, std::span<const double> x) const;
  double latent_t(double t, std::span<const double> x) const;
  double quantile_y(double p, std::span<const double> x) const;
  double quantile_t(double p, std::span<const double> x) const;

  /// F_{Y,T}(y, t | x).
  double joint_cdf(double y, double t, std::span<const double> x) const;

  std::size_t parameter_count() const;
  /// theta = (raw theta_Y, raw theta_T, beta_Y, beta_T, lambda | alpha, gamma).
  std::vector<double> parameters() const;
  std::vector<std::string> parameter_names() const;
  NpbModel with_parameters(std::span<const double> params) const;

 private:
  void check_x(std::span<const double> x) const;

  MarginalModel margin_y_;
  MarginalModel margin_t_;
  Dependence dependence_;
  std::vector<std::string> covariate_names_;
  std::vector<std::size_t> columns_y_;
  std::vector<std::size_t> columns_t_;
  std::vector<std::size_t> columns_dep_;
};

inline double rho_of_x(const NpbModel& model, std::span<const double> x) { return model.rho(x); }

/// Log-density contribution of an observation with both coordinates exact.
double loglik_exact(const NpbModel& model, const Observation& obs);
/// Contribution of an observation with at least one interval-valued coordinate.
double loglik_censored(const NpbModel& model, const Observation& obs);
/// Sum of contributions. Throws NumericError naming the row on zero mass.
double loglik(const NpbModel& model, std::span<const Observation> data);
std::vector<double> loglik_contributions(const NpbModel& model, std::span<const Observation> data);
/// Analytic gradient with respect to NpbModel::parameters().
std::vector<double> score(const NpbModel& model, std::span<const Observation> data);

struct FitConfig {
  MarginalConfig margin_y;
  MarginalConfig margin_t;
  std::vector<std::string> covariate_names;  // columns of Observation::x
  std::vector<std::string> covariates_y;
  std::vector<std::string> covariates_t;
  Dependence::Form dependence = Dependence::Form::constant;
  std::vector<std::string> covariates_dependence;
  OptimOptions optim;
  bool compute_covariance = true;
};

struct ConvergenceReport {
  int iterations = 0;
  std::string message;
  double stage1_loglik = 0.0;
  std::vector<double> trace;
  // Log increments whose increment vanished at the optimum (coefficients tied on
  // the monotonicity boundary). They are held fixed when computing the covariance.
  std::vector<std::size_t> boundary_parameters;
};

struct FitResult {
  NpbModel model;
  double loglik = 0.0;
  double gradient_norm = 0.0;
  Eigen::MatrixXd covariance;  // inverse observed information, unconstrained scale
  std::vector<std::string> parameter_names;
  ConvergenceReport report;

  bool has_covariance() const noexcept { return covariance.rows() > 0; }
};

/// Two-stage maximum likelihood: separate marginal fits, then the joint model from
/// those estimates and lambda = 0. Throws FitError on non-convergence or a singular
/// Hessian (the latter carries no result; set compute_covariance = false to skip it).
FitResult fit(std::span<const Observation> data, const FitConfig& config);

/// Central-difference Hessian of the log-likelihood from the analytic score.
Eigen::MatrixXd numeric_hessian(const NpbModel& model, std::span<const Observation> data);

/// Indices of log-increment parameters whose increment is below 1e-3 of the
/// coefficient range of its margin.
std::vector<std::size_t> boundary_parameters(const NpbModel& model);

/// Inverse observed information with the listed parameters held fixed (their rows
/// and columns are zero). Throws FitError(singular_hessian) when the remaining
/// information is not positive definite (smallest eigenvalue <= 1e-8 x largest).
Eigen::MatrixXd covariance_from_hessian(const Eigen::MatrixXd& hessian, const std::vector<std::size_t>& fixed);

struct Interval {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Wald interval for parameter k on the unconstrained scale.
Interval wald_interval(const FitResult& fit, std::size_t k, double level = 0.95);
/// Wald interval for lambda(x) mapped to rho(x); endpoints stay inside (-1, 1).
Interval rho_interval(const FitResult& fit, std::span<const double> x, double level = 0.95);

using Functional = std::function<std::vector<double>(const NpbModel&)>;

/// Percentile intervals for derived quantities by sampling the coefficient-scale
/// parameters (Bernstein coefficients, betas, dependence) from their asymptotic
/// normal distribution; decreasing coefficient draws are tied. The interval is
/// widened to contain the point estimate when sampling puts it outside.
std::vector<Interval> functional_intervals(const FitResult& fit, const Functional& functional, double level = 0.95,
                                           std::size_t draws = 2000, std::uint64_t seed = 1);

}  // namespace npb
