#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "npb/bvn.hpp"
#include "npb/errors.hpp"
#include "npb/normal.hpp"
#include "npb/roc.hpp"

using namespace npb;
using namespace fixtures;

namespace {

// Correlated standard normal pairs.
struct LatentDraws {
  std::vector<double> z1;
  std::vector<double> z2;
};

LatentDraws latent_draws(double rho, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  LatentDraws d;
  d.z1.resize(n);
  d.z2.resize(n);
  const double s = std::sqrt(1.0 - rho * rho);
  for (std::size_t i = 0; i < n; ++i) {
    d.z1[i] = nd(rng);
    d.z2[i] = rho * d.z1[i] + s * nd(rng);
  }
  return d;
}

double tpr_at(const RocCurve& c, double fpr) {
  for (std::size_t i = 1; i < c.fpr.size(); ++i) {
    if (c.fpr[i] >= fpr) {
      const double span = c.fpr[i] - c.fpr[i - 1];
      if (span <= 0.0) return c.tpr[i];
      return c.tpr[i - 1] + (fpr - c.fpr[i - 1]) / span * (c.tpr[i] - c.tpr[i - 1]);
    }
  }
  return 1.0;
}

}  // namespace

TEST_SUITE("roc") {
  TEST_CASE("sensitivity and specificity under independence and at the ends") {
    const auto m = curved_model(LinkKind::logit, LinkKind::cloglog, 0.0);
    const std::vector<double> x{0.4, -0.1};
    for (double c : {-1.0, 0.2, 1.5}) {
      CHECK(cumulative_sensitivity(m, c, 1.3, x) == doctest::Approx(1.0 - m.cdf_y(c, x)).epsilon(1e-12));
      CHECK(dynamic_specificity(m, c, 1.3, x) == doctest::Approx(m.cdf_y(c, x)).epsilon(1e-12));
      CHECK(incident_sensitivity(m, c, 1.3, x) == doctest::Approx(1.0 - m.cdf_y(c, x)).epsilon(1e-12));
    }
    const auto md = curved_model(LinkKind::probit, LinkKind::probit, 0.9);
    CHECK(cumulative_sensitivity(md, -kInf, 1.0, x) == doctest::Approx(1.0));
    CHECK(dynamic_specificity(md, kInf, 1.0, x) == doctest::Approx(1.0));
    CHECK_THROWS_AS(cumulative_sensitivity(md, 0.0, 1e-30, x), NumericError);
    CHECK_THROWS_AS(dynamic_specificity(md, 0.0, 1e30, x), NumericError);
  }

  TEST_CASE("sensitivity and specificity match latent Monte Carlo frequencies") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (int r = 0; r < 4; ++r) {
      const auto m = curved_model(r % 2 ? LinkKind::logit : LinkKind::probit, LinkKind::probit, -1.5 + 3.0 * ud(rng));
      const std::vector<double> x{ud(rng), ud(rng) - 0.5};
      const double c = m.quantile_y(0.2 + 0.6 * ud(rng), x);
      const double t = m.quantile_t(0.2 + 0.6 * ud(rng), x);
      const double u = m.latent_y(c, x), w = m.latent_t(t, x);
      const auto d = latent_draws(m.rho(x), 1000000, 500 + r);
      double cases = 0, cases_above = 0, controls = 0, controls_below = 0;
      for (std::size_t i = 0; i < d.z1.size(); ++i) {
        if (d.z2[i] <= w) {
          ++cases;
          if (d.z1[i] > u) ++cases_above;
        } else {
          ++controls;
          if (d.z1[i] <= u) ++controls_below;
        }
      }
      CHECK(std::abs(cumulative_sensitivity(m, c, t, x) - cases_above / cases) < 0.002);
      CHECK(std::abs(dynamic_specificity(m, c, t, x) - controls_below / controls) < 0.002);
    }
  }

  TEST_CASE("exhaustivity at a fixed horizon") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (int r = 0; r < 100; ++r) {
      const auto m = curved_model(LinkKind::probit, LinkKind::logit, -3.0 + 6.0 * ud(rng), r % 2 == 0);
      const std::vector<double> x{ud(rng), ud(rng) - 0.5};
      const double c = m.quantile_y(0.01 + 0.98 * ud(rng), x);
      const double t = m.quantile_t(0.01 + 0.98 * ud(rng), x);
      const double ft = m.cdf_t(t, x);
      const double total = cumulative_sensitivity(m, c, t, x) * ft + (1.0 - dynamic_specificity(m, c, t, x)) * (1.0 - ft);
      CHECK(std::abs(total - (1.0 - m.cdf_y(c, x))) < 1e-10);
    }
  }

  TEST_CASE("ROC curve shape") {
    const std::vector<double> none;
    const auto flat = roc_curve(identity_model(0.0), 0.3, none);
    REQUIRE(flat.fpr.size() == kDefaultRocGrid + 2);
    double worst = 0.0;
    for (std::size_t i = 0; i < flat.fpr.size(); ++i) worst = std::max(worst, std::abs(flat.fpr[i] - flat.tpr[i]));
    CHECK(worst < 1e-10);
    CHECK(flat.fpr.front() == 0.0);
    CHECK(flat.tpr.front() == 0.0);
    CHECK(flat.fpr.back() == 1.0);
    CHECK(flat.tpr.back() == 1.0);
    CHECK(flat.thresholds.front() == kInf);
    CHECK(flat.thresholds.back() == -kInf);
    for (std::size_t i = 1; i < flat.thresholds.size(); ++i) CHECK(flat.thresholds[i] < flat.thresholds[i - 1]);

    const auto sharp = roc_curve(identity_model(lambda_from_rho(-0.999)), 0.0, none);
    CHECK(tpr_at(sharp, 0.1) >= 0.99);
  }

  TEST_CASE("ROC is monotone for random configurations") {
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    const LinkKind kinds[] = {LinkKind::probit, LinkKind::logit, LinkKind::cloglog};
    for (int r = 0; r < 200; ++r) {
      const auto m = curved_model(kinds[r % 3], kinds[(r / 3) % 3], -4.0 + 8.0 * ud(rng), r % 2 == 1);
      const std::vector<double> x{ud(rng), ud(rng) - 0.5};
      const auto c = roc_curve(m, m.quantile_t(0.05 + 0.9 * ud(rng), x), x, 64);
      for (std::size_t i = 1; i < c.fpr.size(); ++i) {
        CHECK(c.fpr[i] >= c.fpr[i - 1]);
        CHECK(c.tpr[i] >= c.tpr[i - 1]);
      }
      CHECK(c.auc >= 0.0);
      CHECK(c.auc <= 1.0);
    }
  }

  TEST_CASE("AUC values") {
    const std::vector<double> none;
    CHECK(std::abs(auc(identity_model(0.0), 0.0, none) - 0.5) < 1e-6);
    const double lam = lambda_from_rho(-0.5);
    const double a_neg = auc(identity_model(lam), 0.0, none);
    const double a_pos = auc(identity_model(-lam), 0.0, none);
    CHECK(std::abs(a_neg + a_pos - 1.0) < 1e-12);

    // Monte Carlo: P(Y_i > Y_j | T_i <= t, T_j > t) over 1e6 independent case/control pairs.
    const auto d = latent_draws(-0.5, 2400000, 2);
    std::vector<double> cases, controls;
    for (std::size_t i = 0; i < d.z1.size(); ++i) (d.z2[i] <= 0.0 ? cases : controls).push_back(d.z1[i]);
    const std::size_t pairs = 1000000;
    REQUIRE(cases.size() >= pairs);
    REQUIRE(controls.size() >= pairs);
    double wins = 0.0;
    for (std::size_t i = 0; i < pairs; ++i) wins += cases[i] > controls[i] ? 1.0 : 0.0;
    CHECK(std::abs(a_neg - wins / pairs) < 0.003);
    // grid convergence
    CHECK(std::abs(auc(identity_model(lam), 0.0, none, 512) - auc(identity_model(lam), 0.0, none, 4096)) < 1e-4);
  }

  TEST_CASE("negative dependence gives an informative marker") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (int r = 0; r < 50; ++r) {
      const auto m = curved_model(LinkKind::logit, LinkKind::probit, 0.05 + 3.0 * ud(rng));
      const std::vector<double> x{ud(rng), ud(rng) - 0.5};
      for (double p : {0.05, 0.3, 0.7, 0.95}) CHECK(auc(m, m.quantile_t(p, x), x, 128) > 0.5);
    }
  }

  TEST_CASE("Youden index") {
    const std::vector<double> none;
    const auto flat = youden(identity_model(0.0), 0.0, none);
    CHECK(flat.flat);
    CHECK(flat.index == doctest::Approx(0.0).epsilon(1e-12));

    const auto m = identity_model(lambda_from_rho(-0.5));
    const auto yi = youden(m, 0.0, none);
    CHECK_FALSE(yi.flat);
    CHECK(yi.index == doctest::Approx(yi.sensitivity + yi.specificity - 1.0));
    CHECK(yi.sensitivity == doctest::Approx(cumulative_sensitivity(m, yi.threshold, 0.0, none)).epsilon(1e-8));
    CHECK(yi.specificity == doctest::Approx(dynamic_specificity(m, yi.threshold, 0.0, none)).epsilon(1e-8));
    // symmetric margins at the median horizon: the optimum is the marker median
    CHECK(std::abs(yi.threshold - m.quantile_y(0.5, none)) < 1e-6);
    // no grid threshold beats the refined optimum
    const auto curve = roc_curve(m, 0.0, none);
    for (std::size_t i = 0; i < curve.fpr.size(); ++i) CHECK(curve.tpr[i] - curve.fpr[i] <= yi.index + 1e-12);

    const auto cm = curved_model(LinkKind::cloglog, LinkKind::logit, 0.8);
    const std::vector<double> x{0.3, 0.2};
    const double t = cm.quantile_t(0.3, x);
    const auto yc = youden(cm, t, x);
    CHECK(yc.index == doctest::Approx(cumulative_sensitivity(cm, yc.threshold, t, x) +
                                      dynamic_specificity(cm, yc.threshold, t, x) - 1.0)
                          .epsilon(1e-8));
  }

  TEST_CASE("incident sensitivity") {
    const auto m = curved_model(LinkKind::probit, LinkKind::probit, -0.7);
    const std::vector<double> x{0.2, 0.1};
    const double t = m.quantile_t(0.4, x);
    const double rho = m.rho(x);
    const double w = m.latent_t(t, x);
    const double c = m.quantile_y(norm_cdf(rho * w), x);
    CHECK(incident_sensitivity(m, c, t, x) == doctest::Approx(0.5).epsilon(1e-8));

    // conditional Monte Carlo: draws with |Z_T - w| < 0.01
    const auto d = latent_draws(rho, 4000000, 8);
    const double u = m.latent_y(m.quantile_y(0.35, x), x);
    double near = 0, above = 0;
    for (std::size_t i = 0; i < d.z1.size(); ++i)
      if (std::abs(d.z2[i] - w) < 0.01) {
        ++near;
        if (d.z1[i] > u) ++above;
      }
    CHECK(std::abs(incident_sensitivity(m, m.quantile_y(0.35, x), t, x) - above / near) < 0.01);

    // limit of the cumulative version over a shrinking window (t, t + eps]
    const double eps = 1e-4;
    const double cy = m.quantile_y(0.6, x);
    const double window = m.cdf_t(t + eps, x) - m.cdf_t(t, x);
    const double joint_above = (m.cdf_t(t + eps, x) - m.joint_cdf(cy, t + eps, x)) - (m.cdf_t(t, x) - m.joint_cdf(cy, t, x));
    CHECK(std::abs(joint_above / window - incident_sensitivity(m, cy, t, x)) < 1e-3);

    double prev = 1.0;
    for (double p = 0.01; p < 1.0; p += 0.05) {
      const double v = incident_sensitivity(m, m.quantile_y(p, x), t, x);
      CHECK(v <= prev);
      prev = v;
    }
  }

  TEST_CASE("incident ROC curves") {
    const std::vector<double> none;
    const auto flat = incident_static_roc(identity_model(0.0), -0.2, 0.8, none);
    for (std::size_t i = 0; i < flat.fpr.size(); ++i) CHECK(std::abs(flat.fpr[i] - flat.tpr[i]) < 1e-10);

    const auto m = curved_model(LinkKind::probit, LinkKind::logit, 0.9);
    const std::vector<double> x{0.5, 0.0};
    const double t = m.quantile_t(0.4, x);
    const auto same = incident_static_roc(m, t, t, x, 64);
    const auto dyn = roc_curve(m, t, x, 64);
    for (std::size_t i = 0; i < same.fpr.size(); ++i) CHECK(same.fpr[i] == doctest::Approx(dyn.fpr[i]));

    // AUC: P(Y_case > Y_control) for cases with T near t and controls with T > t_star
    const double t_star = m.quantile_t(0.7, x);
    const auto is = incident_static_roc(m, t, t_star, x);
    const double rho = m.rho(x);
    const double w = m.latent_t(t, x), ws = m.latent_t(t_star, x);
    const auto d = latent_draws(rho, 6000000, 19);
    std::vector<double> cases, controls;
    for (std::size_t i = 0; i < d.z1.size(); ++i) {
      if (std::abs(d.z2[i] - w) < 0.01) cases.push_back(d.z1[i]);
      if (d.z2[i] > ws) controls.push_back(d.z1[i]);
    }
    const std::size_t pairs = std::min(cases.size(), controls.size());
    double wins = 0;
    for (std::size_t i = 0; i < pairs; ++i) wins += cases[i] > controls[i];
    CHECK(std::abs(is.auc - wins / pairs) < 0.01);
  }

  TEST_CASE("conditional survival given a marker range") {
    const auto m0 = curved_model(LinkKind::probit, LinkKind::cloglog, 0.0);
    const std::vector<double> x{0.3, -0.3};
    const double t = m0.quantile_t(0.45, x);
    CHECK(conditional_survival_given_marker_range(m0, -0.5, 0.7, t, x) == doctest::Approx(1.0 - m0.cdf_t(t, x)));
    const auto m = curved_model(LinkKind::probit, LinkKind::cloglog, lambda_from_rho(-0.5));
    CHECK(conditional_survival_given_marker_range(m, -kInf, kInf, t, x) == doctest::Approx(1.0 - m.cdf_t(t, x)));
    CHECK_THROWS(conditional_survival_given_marker_range(m, 1.0, 1.0, t, x));

    // tertiles of the marker under rho = -0.5
    const double q1 = m.quantile_y(1.0 / 3.0, x), q2 = m.quantile_y(2.0 / 3.0, x);
    const double u1 = m.latent_y(q1, x), u2 = m.latent_y(q2, x);
    const auto d = latent_draws(-0.5, 1000000, 77);
    for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const double tp = m.quantile_t(p, x);
      const double w = m.latent_t(tp, x);
      const double lo = conditional_survival_given_marker_range(m, -kInf, q1, tp, x);
      const double mid = conditional_survival_given_marker_range(m, q1, q2, tp, x);
      const double hi = conditional_survival_given_marker_range(m, q2, kInf, tp, x);
      CHECK(lo >= mid);
      CHECK(mid >= hi);
      double n[3] = {0, 0, 0}, s[3] = {0, 0, 0};
      for (std::size_t i = 0; i < d.z1.size(); ++i) {
        const int g = d.z1[i] <= u1 ? 0 : (d.z1[i] <= u2 ? 1 : 2);
        ++n[g];
        if (d.z2[i] > w) ++s[g];
      }
      CHECK(std::abs(lo - s[0] / n[0]) < 0.005);
      CHECK(std::abs(mid - s[1] / n[1]) < 0.005);
      CHECK(std::abs(hi - s[2] / n[2]) < 0.005);
      // conditional quantile inverts the conditional survival
      const double tq = conditional_time_quantile(m, 1.0 - mid, q1, q2, x);
      CHECK(tq == doctest::Approx(tp).epsilon(1e-6));
    }
  }
}
