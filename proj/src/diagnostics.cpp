#include "npb/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>

#include "npb/bvn.hpp"
#include "npb/errors.hpp"
#include "npb/normal.hpp"
#include "npb/rng.hpp"
#include "npb/roc.hpp"

namespace npb {
namespace {

double clip(double u) { return std::clamp(u, kPitClip, 1.0 - kPitClip); }

Philox row_generator(std::uint64_t seed, std::size_t row) { return Philox(seed, streams::make(streams::kPit, 0, row)); }

void require_data(std::span<const Observation> data) {
  if (data.empty()) throw std::invalid_argument("no observations");
}

template <class Cdf>
std::vector<double> event_pit(std::span<const Observation> data, std::uint64_t seed, Cdf cdf) {
  require_data(data);
  std::vector<double> u(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Observation& o = data[i];
    if (o.t_exact()) {
      u[i] = clip(cdf(o.t_lower, i));
      continue;
    }
    const double lo = std::isfinite(o.t_lower) ? cdf(o.t_lower, i) : 0.0;
    const double hi = std::isfinite(o.t_upper) ? cdf(o.t_upper, i) : 1.0;
    Philox rng = row_generator(seed, i);
    u[i] = clip(lo + rng.uniform() * (hi - lo));
  }
  return u;
}

}  // namespace

std::vector<double> pit_event_time(const NpbModel& model, std::span<const Observation> data, std::uint64_t seed) {
  validate_observations(data, model.covariate_names().size());
  return event_pit(data, seed, [&](double t, std::size_t i) { return model.cdf_t(t, data[i].x); });
}

std::vector<double> pit_event_time(const KaplanMeier& km, std::span<const Observation> data, std::uint64_t seed) {
  return event_pit(data, seed, [&](double t, std::size_t) { return km.cdf(t); });
}

KaplanMeier kaplan_meier(std::span<const Observation> data) {
  require_data(data);
  std::vector<double> times(data.size());
  std::vector<bool> event(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    times[i] = data[i].t_lower;
    event[i] = data[i].t_exact();
  }
  return kaplan_meier(times, event);
}

std::vector<double> pit_biomarker_conditional(const NpbModel& model, std::span<const Observation> data,
                                              std::uint64_t seed) {
  require_data(data);
  validate_observations(data, model.covariate_names().size());
  std::vector<double> u(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Observation& o = data[i];
    const double rho = model.rho(o.x);
    if (!(std::abs(rho) < 1.0)) throw NumericError("Rosenblatt transform needs |rho| < 1");
    const double s = std::sqrt(1.0 - rho * rho);
    // conditional CDF of the latent biomarker at latent value v
    std::function<double(double)> cond;
    if (o.t_exact()) {
      const double w = model.latent_t(o.t_lower, o.x);
      cond = [=](double v) {
        if (std::isinf(v)) return v > 0 ? 1.0 : 0.0;
        return norm_cdf((v - rho * w) / s);
      };
    } else {
      const double wa = model.latent_t(o.t_lower, o.x);
      const double wb = model.latent_t(o.t_upper, o.x);
      const double mass = norm_interval(wa, wb);
      if (!(mass > kDenominatorGuard))
        throw NumericError("observation " + std::to_string(i) + ": event-time interval has no probability mass");
      cond = [=](double v) { return rectangle_probability(-kInf, v, wa, wb, rho) / mass; };
    }
    if (o.y_exact()) {
      u[i] = clip(cond(model.latent_y(o.y_lower, o.x)));
    } else {
      const double lo = cond(model.latent_y(o.y_lower, o.x));
      const double hi = cond(model.latent_y(o.y_upper, o.x));
      Philox rng = row_generator(seed, i);
      rng();  // the first draw of the row belongs to the event-time PIT
      rng();
      u[i] = clip(lo + rng.uniform() * (hi - lo));
    }
  }
  return u;
}

double kolmogorov_survival(double lambda) {
  if (std::isnan(lambda)) throw std::invalid_argument("NaN KS statistic");
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // P(K <= l) = sqrt(2 pi) / l * sum_k exp(-(2k-1)^2 pi^2 / (8 l^2))
    const double c = -std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double s = 0.0;
    for (int k = 1; k <= 20; ++k) s += std::exp(c * (2 * k - 1) * (2 * k - 1));
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

QqResult qq_uniform(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("no PIT values");
  QqResult r;
  r.sample.assign(values.begin(), values.end());
  for (double v : r.sample)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("PIT values must lie in [0, 1]");
  std::sort(r.sample.begin(), r.sample.end());
  const double n = static_cast<double>(r.sample.size());
  r.theoretical.resize(r.sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < r.sample.size(); ++i) {
    r.theoretical[i] = (static_cast<double>(i) + 0.5) / n;
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - r.sample[i], r.sample[i] - static_cast<double>(i) / n});
  }
  r.ks_statistic = d;
  r.ks_p_value = kolmogorov_survival(std::sqrt(n) * d);
  return r;
}

}  // namespace npb
