#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "npb/diagnostics.hpp"
#include "npb/normal.hpp"
#include "npb/rng.hpp"

using namespace npb;
using namespace fixtures;

namespace {

// Independent censoring with log C ~ N(shift, 1) under the lognormal model:
// P(C < T) = Phi(-shift / sqrt 2), 0.28 for the default shift.
std::vector<Observation> censored_sample(const NpbModel& m, std::size_t n, std::uint64_t seed, double shift = 0.8) {
  auto data = sample(m, n, seed);
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  std::normal_distribution<double> nd;
  for (auto& o : data) {
    const double c = std::exp(shift + nd(rng));
    if (c < o.t_lower) o = Observation::censored(o.y_lower, c, o.x);
  }
  return data;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_SUITE("diagnostics") {
  TEST_CASE("qq_uniform on the midpoint grid") {
    const std::size_t n = 200;
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = (i + 0.5) / n;
    std::reverse(u.begin(), u.end());
    const auto r = qq_uniform(u);
    CHECK(r.ks_statistic == doctest::Approx(0.5 / n).epsilon(1e-12));
    CHECK(r.ks_p_value > 0.999);
    CHECK(r.theoretical.front() == doctest::Approx(0.5 / n));
    CHECK(std::is_sorted(r.sample.begin(), r.sample.end()));
  }

  TEST_CASE("qq_uniform on a constant sample") {
    std::vector<double> u(50, 0.5);
    const auto r = qq_uniform(u);
    CHECK(r.ks_statistic == doctest::Approx(0.5));
    CHECK(r.ks_p_value < 1e-9);
  }

  TEST_CASE("qq_uniform rejects values outside [0, 1]") {
    std::vector<double> u{0.2, 1.5};
    CHECK_THROWS_AS(qq_uniform(u), std::invalid_argument);
    CHECK_THROWS_AS(qq_uniform(std::vector<double>{}), std::invalid_argument);
  }

  TEST_CASE("Kolmogorov survival: both series agree and match reference points") {
    // Reference quantiles of the Kolmogorov distribution.
    CHECK(kolmogorov_survival(1.3580986) == doctest::Approx(0.05).epsilon(1e-5));
    CHECK(kolmogorov_survival(1.6276236) == doctest::Approx(0.01).epsilon(1e-5));
    CHECK(kolmogorov_survival(0.8275735) == doctest::Approx(0.50).epsilon(1e-5));
    // Continuity across the switch between the two series.
    CHECK(kolmogorov_survival(1.18 - 1e-12) == doctest::Approx(kolmogorov_survival(1.18)).epsilon(1e-10));
    double prev = 1.0;
    for (double l = 0.05; l < 4.0; l += 0.01) {
      const double q = kolmogorov_survival(l);
      CHECK(q <= prev + 1e-15);
      prev = q;
    }
  }

  TEST_CASE("uniform samples pass the KS test at the nominal rate") {
    int pass = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      Philox rng(seed);
      std::vector<double> u(10000);
      for (auto& v : u) v = rng.uniform();
      if (qq_uniform(u).ks_p_value > 0.01) ++pass;
    }
    CHECK(pass >= 95);
  }

  TEST_CASE("event-time PIT of a censored row lies above the CDF at the censoring time") {
    const auto m = lognormal_model(-0.5);
    const auto obs = Observation::censored(0.1, std::exp(norm_quantile(0.4)), {0.0, 0.0});
    std::vector<Observation> data(25, obs);
    const auto u = pit_event_time(m, data, 9);
    for (double v : u) {
      CHECK(v > 0.4);
      CHECK(v < 1.0);
    }
  }

  TEST_CASE("event-time PIT under the true model is uniform") {
    const auto m = lognormal_model(-0.6);
    int pass = 0;
    double frac = 0.0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const auto data = censored_sample(m, 1000, seed);
      frac += std::count_if(data.begin(), data.end(), [](const Observation& o) { return !o.t_exact(); }) / 1000.0;
      if (qq_uniform(pit_event_time(m, data, seed)).ks_p_value > 0.05) ++pass;
    }
    CHECK(frac / 100 == doctest::Approx(0.30).epsilon(0.1));
    CHECK(pass >= 90);
  }

  TEST_CASE("Kaplan-Meier PIT without censoring is rank / n") {
    const auto m = curved_model(LinkKind::logit, LinkKind::cloglog, 0.4);
    const auto data = sample(m, 300, 4);
    const auto km = kaplan_meier(data);
    const auto u = pit_event_time(km, data, 1);
    std::vector<double> t;
    for (const auto& o : data) t.push_back(o.t_lower);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double rank = std::count_if(t.begin(), t.end(), [&](double s) { return s <= t[i]; });
      CHECK(u[i] == doctest::Approx(std::min(rank / 300.0, 1.0 - kPitClip)));
    }
  }

  TEST_CASE("Kaplan-Meier PIT under censoring is roughly uniform") {
    const auto m = lognormal_model(0.0);
    const auto data = censored_sample(m, 2000, 17);
    const auto u = pit_event_time(kaplan_meier(data), data, 3);
    CHECK(qq_uniform(u).ks_p_value > 0.001);
  }

  TEST_CASE("conditional biomarker PIT with independence reduces to the marginal CDF") {
    const auto m = curved_model(LinkKind::probit, LinkKind::logit, 0.0);
    auto data = censor_mixed(sample(m, 60, 8));
    const auto u = pit_biomarker_conditional(m, data, 5);
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!data[i].y_exact()) continue;
      CHECK(u[i] == doctest::Approx(std::clamp(m.cdf_y(data[i].y_lower, data[i].x), kPitClip, 1 - kPitClip))
                         .epsilon(1e-10));
    }
  }

  TEST_CASE("conditional biomarker PIT for exact pairs is the Rosenblatt transform") {
    const double lambda = 0.9;
    const auto m = lognormal_model(lambda);
    const double rho = rho_from_lambda(lambda);
    const auto o = Observation::exact(0.3, std::exp(-0.7), {0.0, 0.0});
    const auto u = pit_biomarker_conditional(m, std::vector<Observation>{o}, 1);
    CHECK(u[0] == doctest::Approx(norm_cdf((0.3 - rho * -0.7) / std::sqrt(1 - rho * rho))).epsilon(1e-12));
  }

  TEST_CASE("the two PITs are uniform and uncorrelated under the true model") {
    const auto m = lognormal_model(-0.98);  // rho ~ 0.7
    int small_corr = 0;
    double mean_u1 = 0.0;
    double mean_u2 = 0.0;
    const std::size_t n = 1000;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      const auto data = censored_sample(m, n, seed + 100);
      const auto u1 = pit_event_time(m, data, seed);
      const auto u2 = pit_biomarker_conditional(m, data, seed);
      if (std::abs(correlation(u1, u2)) < 2.0 / std::sqrt(static_cast<double>(n))) ++small_corr;
      mean_u1 += std::accumulate(u1.begin(), u1.end(), 0.0) / n;
      mean_u2 += std::accumulate(u2.begin(), u2.end(), 0.0) / n;
      CHECK(qq_uniform(u2).ks_p_value > 1e-4);
    }
    CHECK(small_corr >= 45);
    const double band = 3.0 / std::sqrt(12.0 * n * 50);
    CHECK(std::abs(mean_u1 / 50 - 0.5) < band);
    CHECK(std::abs(mean_u2 / 50 - 0.5) < band);
  }

  TEST_CASE("PITs are deterministic in the seed and stay inside (0, 1)") {
    const auto m = curved_model(LinkKind::cloglog, LinkKind::probit, -0.4, true);
    const auto data = censor_mixed(sample(m, 120, 2));
    const auto a = pit_biomarker_conditional(m, data, 77);
    const auto b = pit_biomarker_conditional(m, data, 77);
    CHECK(a == b);
    CHECK(pit_event_time(m, data, 77) == pit_event_time(m, data, 77));
    CHECK(pit_event_time(m, data, 77) != pit_event_time(m, data, 78));
    for (double v : a) CHECK((v >= kPitClip && v <= 1 - kPitClip));
  }
}
