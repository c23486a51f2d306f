#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "npb/joint.hpp"
#include "npb/roc.hpp"

namespace npb {

enum class BiomarkerDist { normal, normal_mixture, chisq };
enum class TimeDist { lognormal, weibull, gamma };

std::string to_string(BiomarkerDist d);
std::string to_string(TimeDist d);
BiomarkerDist parse_biomarker_dist(const std::string& name);
TimeDist parse_time_dist(const std::string& name);

/// Marginal laws used by the simulation designs:
///   normal         N(0, 1)
///   normal_mixture 0.5 N(1, 1) + 0.5 N(4, 1.5^2)
///   chisq          chi-square, 3 df
///   lognormal      log T ~ N(0, 1)
///   weibull        shape 1.4, rate 2.0 (scale 0.5)
///   gamma          shape 1.5, rate 1.2
double biomarker_cdf(BiomarkerDist d, double y);
double time_cdf(TimeDist d, double t);
/// h = Phi^{-1}(F(v)), evaluated on the tail that keeps precision.
double biomarker_latent(BiomarkerDist d, double y);
double time_latent(TimeDist d, double t);
/// F^{-1}(Phi(z)).
double biomarker_from_latent(BiomarkerDist d, double z);
double time_from_latent(TimeDist d, double z);

/// Covariate shift on the latent scale: (Z1 + gamma_y X, Z2 + gamma_t X), X ~ U(0, 1).
struct CovariateEffects {
  double gamma_y = 0.5;
  double gamma_t = 3.0;
};

struct DgpConfig {
  std::size_t n = 500;
  double rho = -0.5;
  BiomarkerDist biomarker = BiomarkerDist::normal;
  TimeDist time = TimeDist::weibull;
  double censor_rate = 0.3;  // kappa = P(T > C); 0 disables censoring
  std::optional<CovariateEffects> covariates;
  std::uint64_t seed = 1;
};

/// Throws std::invalid_argument.
void validate(const DgpConfig& config);

/// a = Phi^{-1}(kappa) sqrt 2, so that C with F_C(c) = Phi(h_T(c) + a) censors a
/// fraction kappa of event times. Requires 0 < kappa < 1.
double censoring_offset(double kappa);

struct SimulatedData {
  std::vector<Observation> observations;
  std::vector<std::string> covariate_names;  // {"x"} with covariates, else empty
  std::vector<double> event_time;             // uncensored T
  std::vector<double> censoring_time;         // C; +inf without censoring
};

/// Data for replication `replication` of scenario cell `cell`. Latent pairs and
/// covariates come from stream (kDataset, cell, replication) and censoring times
/// from (kCensoring, cell, replication) of config.seed. With covariates the
/// censoring latent carries the same shift gamma_t X, keeping P(T > C) = kappa.
SimulatedData generate_dataset(const DgpConfig& config, std::uint64_t cell = 0, std::uint64_t replication = 0);

/// Quantile q of the unconditional event-time law (a mixture over X when covariates are present).
double event_time_quantile(const DgpConfig& config, double q);
/// Quantile q of T given X = x.
double conditional_event_time_quantile(const DgpConfig& config, double q, double x);

/// Exact cumulative-dynamic ROC of the design at horizon t (and covariate x when
/// the design has one). Thresholds are on the biomarker scale.
RocCurve true_roc(const DgpConfig& config, double t, std::optional<double> x = std::nullopt,
                  std::size_t grid_size = kDefaultRocGrid);

/// sqrt(integral over [0, 1] of (estimated(p) - truth(p))^2) for the piecewise-linear
/// interpolants of two ROC curves; each union-grid segment is integrated exactly.
double rise(const RocCurve& estimated, const RocCurve& truth);

/// Inverse-probability-of-censoring weighted empirical cumulative-dynamic ROC with
/// Kaplan-Meier censoring weights; thresholds at every distinct marker value.
/// Requires exact biomarkers and right-censored or exact times.
RocCurve empirical_baseline_roc(std::span<const Observation> data, double t);

/// Misspecified design: X ~ N(1, 1), Y | X ~ N(x, 1), log T = y + 0.5 x + Z with Z
/// minimum extreme value, independent censoring calibrated to censor_rate.
struct MisspecConfig {
  std::size_t n = 500;
  double censor_rate = 0.3;
  std::uint64_t seed = 1;
};

/// Offset d of log C = log T' + d (T' an independent copy of T) giving P(T > C) = kappa.
double misspecification_censoring_offset(double kappa);
SimulatedData misspecification_scenario(const MisspecConfig& config, std::uint64_t replication = 0);
/// Covariate-specific ROC of the misspecified design at (t, x), by 1-D quadrature.
RocCurve misspecification_true_roc(double t, double x, std::size_t grid_size = kDefaultRocGrid);

}  // namespace npb
