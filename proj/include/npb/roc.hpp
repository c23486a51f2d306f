#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "npb/joint.hpp"

namespace npb {

/// Denominators (F_T(t|x), 1 - F_T(t|x), marker-stratum mass) at or below this
/// value are reported as errors.
inline constexpr double kDenominatorGuard = 1e-10;
inline constexpr std::size_t kDefaultRocGrid = 512;

/// P(Y > c | T <= t, x).
double cumulative_sensitivity(const NpbModel& model, double c, double t, std::span<const double> x);
/// P(Y <= c | T > t, x).
double dynamic_specificity(const NpbModel& model, double c, double t, std::span<const double> x);
/// P(Y > c | T = t, x).
double incident_sensitivity(const NpbModel& model, double c, double t, std::span<const double> x);

/// ROC curve traversed from threshold +inf (point (0,0)) down to -inf (point (1,1)).
struct RocCurve {
  double horizon = 0.0;
  std::vector<double> x;
  std::vector<double> thresholds;  // decreasing, original marker scale
  std::vector<double> fpr;         // nondecreasing
  std::vector<double> tpr;         // nondecreasing
  double auc = 0.0;
};

/// Cumulative-dynamic ROC at horizon t. Thresholds are the grid_size quantiles
/// k / (grid_size + 1) of F_Y(.|x) plus +-inf.
RocCurve roc_curve(const NpbModel& model, double t, std::span<const double> x, std::size_t grid_size = kDefaultRocGrid);

/// Cumulative-dynamic ROC of a standard bivariate normal pair at latent horizon w.
/// Thresholds are left on the latent scale (Phi^{-1} of the grid quantiles).
RocCurve latent_roc_curve(double w, double rho, std::size_t grid_size = kDefaultRocGrid);

/// Trapezoidal AUC of roc_curve (computed without mapping thresholds back to the marker scale).
double auc(const NpbModel& model, double t, std::span<const double> x, std::size_t grid_size = kDefaultRocGrid);

/// Incident sensitivity at t against static specificity P(Y <= c | T > t_star).
RocCurve incident_static_roc(const NpbModel& model, double t, double t_star, std::span<const double> x,
                             std::size_t grid_size = kDefaultRocGrid);
/// Incident sensitivity at t against dynamic specificity at t.
RocCurve incident_dynamic_roc(const NpbModel& model, double t, std::span<const double> x,
                              std::size_t grid_size = kDefaultRocGrid);

struct YoudenResult {
  double index = 0.0;
  double threshold = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  bool flat = false;  // Se + Sp - 1 varies by at most 1e-12 over the grid
};

/// Maximiser of Se + Sp - 1 over the finite grid thresholds, refined by
/// golden-section search between the neighbouring grid points. Ties go to the
/// smallest threshold.
YoudenResult youden(const NpbModel& model, double t, std::span<const double> x,
                    std::size_t grid_size = kDefaultRocGrid);

/// P(T > t | a < Y <= b, x).
double conditional_survival_given_marker_range(const NpbModel& model, double a, double b, double t,
                                               std::span<const double> x);

/// Time s with P(T <= s | a < Y <= b, x) = p.
double conditional_time_quantile(const NpbModel& model, double p, double a, double b, std::span<const double> x);

}  // namespace npb
