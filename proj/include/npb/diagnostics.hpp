#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "npb/joint.hpp"
#include "npb/margins.hpp"

namespace npb {

/// PIT values are clipped to [kPitClip, 1 - kPitClip].
inline constexpr double kPitClip = 1e-12;

/// Event-time PIT under the fitted model. Exact times give F_T(t|x); a censored
/// time in (t_lower, t_upper] gives a uniform draw on (F_T(t_lower|x), F_T(t_upper|x)).
/// Draws come from a counter-based generator keyed by (seed, row), so a row's
/// value does not depend on the other rows.
std::vector<double> pit_event_time(const NpbModel& model, std::span<const Observation> data, std::uint64_t seed);

/// Model-free variant with the Kaplan-Meier CDF in place of F_T(.|x).
std::vector<double> pit_event_time(const KaplanMeier& km, std::span<const Observation> data, std::uint64_t seed);

/// Kaplan-Meier estimate from observations: exact times are events, every other
/// row counts as censored at t_lower.
KaplanMeier kaplan_meier(std::span<const Observation> data);

/// Biomarker PIT conditional on the event-time information (Rosenblatt transform):
/// exact time -> P(Y <= y | T = t, x); interval time -> P(Y <= y | t_lower < T <= t_upper, x).
/// Interval-valued biomarkers (detection limits) get a uniform draw between the
/// conditional CDF at their bounds.
std::vector<double> pit_biomarker_conditional(const NpbModel& model, std::span<const Observation> data,
                                              std::uint64_t seed);

struct QqResult {
  std::vector<double> theoretical;  // (i - 0.5) / n
  std::vector<double> sample;       // sorted values
  double ks_statistic = 0.0;
  double ks_p_value = 1.0;  // asymptotic Kolmogorov distribution
};

QqResult qq_uniform(std::span<const double> values);

/// P(K > lambda) for the Kolmogorov distribution.
double kolmogorov_survival(double lambda);

}  // namespace npb
