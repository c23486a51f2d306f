#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "npb/bvn.hpp"
#include "npb/errors.hpp"
#include "npb/joint.hpp"
#include "npb/normal.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace npb;
using namespace fixtures;


TEST_SUITE("joint") {
  TEST_CASE("rho from lambda") {
    const auto m = identity_model(0.0);
    CHECK(m.rho(std::vector<double>{}) == 0.0);
    CHECK(identity_model(1.0).rho(std::vector<double>{}) == doctest::Approx(-1.0 / std::sqrt(2.0)));
    CHECK(identity_model(-1.0).rho(std::vector<double>{}) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(lambda_from_rho(rho_from_lambda(0.37)) == doctest::Approx(0.37));
    const auto cm = curved_model(LinkKind::probit, LinkKind::probit, 0.2, true);
    CHECK(cm.rho(std::vector<double>{0.1, 0.4}) == doctest::Approx(rho_from_lambda(0.2 + 0.5 * 0.4)));
    CHECK_THROWS(cm.rho(std::vector<double>{0.1}));
    // constant dependence ignores x
    CHECK(curved_model(LinkKind::probit, LinkKind::probit, 0.2).rho(std::vector<double>{}) == rho_from_lambda(0.2));
  }

  TEST_CASE("exact contribution") {
    const auto m = identity_model(0.0);
    CHECK(loglik_exact(m, Observation::exact(0.0, 0.0)) == doctest::Approx(-std::log(2.0 * std::numbers::pi)));
    for (LinkKind ly : {LinkKind::probit, LinkKind::logit, LinkKind::cloglog}) {
      const auto cm = curved_model(ly, LinkKind::cloglog, 0.0);
      const Observation o = Observation::exact(0.4, 1.7, {0.3, -0.2});
      UnivariateData dy{{0.4}, {0.4}, {{0.3}}, {"x1"}};
      UnivariateData dt{{1.7}, {1.7}, {{0.3, -0.2}}, {"x1", "x2"}};
      CHECK(loglik_exact(cm, o) ==
            doctest::Approx(marginal_loglik(cm.margin_y(), dy) + marginal_loglik(cm.margin_t(), dt)).epsilon(1e-12));
    }
  }

  TEST_CASE("exact contribution is the mixed partial of the joint CDF") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    const LinkKind kinds[] = {LinkKind::probit, LinkKind::logit, LinkKind::cloglog};
    for (int r = 0; r < 60; ++r) {
      const auto m = curved_model(kinds[r % 3], kinds[(r / 3) % 3], -1.5 + 3.0 * ud(rng), r % 2 == 1);
      const std::vector<double> x{ud(rng), ud(rng) - 0.5};
      const double y = m.quantile_y(0.05 + 0.9 * ud(rng), x);
      const double t = m.quantile_t(0.05 + 0.9 * ud(rng), x);
      // fourth-order accurate mixed difference (Richardson on two step sizes)
      auto mixed = [&](double hy, double ht) {
        return (m.joint_cdf(y + hy, t + ht, x) - m.joint_cdf(y + hy, t - ht, x) - m.joint_cdf(y - hy, t + ht, x) +
                m.joint_cdf(y - hy, t - ht, x)) /
               (4.0 * hy * ht);
      };
      const double hy = 1e-3, ht = 1e-3 * t;
      const double d = (4.0 * mixed(hy, ht) - mixed(2.0 * hy, 2.0 * ht)) / 3.0;
      CHECK(std::abs(loglik_exact(m, Observation::exact(y, t, x)) - std::log(d)) < 1e-5);
    }
  }

  TEST_CASE("censored contributions") {
    const auto m = curved_model(LinkKind::probit, LinkKind::logit, 0.0);
    const std::vector<double> x{0.5, 0.1};
    const Observation rc = Observation::censored(0.3, 1.2, x);
    UnivariateData dy{{0.3}, {0.3}, {{0.5}}, {"x1"}};
    const double expected = marginal_loglik(m.margin_y(), dy) + std::log(1.0 - m.cdf_t(1.2, x));
    CHECK(loglik_censored(m, rc) == doctest::Approx(expected).epsilon(1e-12));
    CHECK_THROWS(loglik_censored(m, Observation::exact(0.3, 1.2, x)));
    CHECK_THROWS(loglik_exact(m, rc));

    // both coordinates interval-valued: four-term CDF identity
    const auto md = curved_model(LinkKind::logit, LinkKind::probit, 0.8);
    const Observation box{-0.4, 0.9, 0.6, 2.2, x};
    const double rect = md.joint_cdf(0.9, 2.2, x) - md.joint_cdf(-0.4, 2.2, x) - md.joint_cdf(0.9, 0.6, x) +
                        md.joint_cdf(-0.4, 0.6, x);
    CHECK(std::abs(std::exp(loglik_censored(md, box)) - rect) < 1e-10);
  }

  TEST_CASE("interval contributions match 2-D quadrature of the density") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (int r = 0; r < 8; ++r) {
      const auto m = curved_model(r % 2 ? LinkKind::logit : LinkKind::probit, r % 3 ? LinkKind::cloglog : LinkKind::probit,
                                  -1.0 + 2.0 * ud(rng));
      const std::vector<double> x{ud(rng), ud(rng) - 0.5};
      const double y0 = m.quantile_y(0.1 + 0.5 * ud(rng), x), y1 = m.quantile_y(0.65 + 0.3 * ud(rng), x);
      const double t0 = m.quantile_t(0.1 + 0.5 * ud(rng), x), t1 = m.quantile_t(0.65 + 0.3 * ud(rng), x);
      const double r0 = m.rho(x);
      // phi_rho over the latent image of the rectangle (the margins are monotone).
      const double za = m.latent_y(y0, x), zb = m.latent_y(y1, x);
      const double wa = m.latent_t(t0, x), wb = m.latent_t(t1, x);
      auto inner = [&](double zy) {
        return oracle::gk([&](double zt) { return oracle::bvn_pdf(zy, zt, r0); }, wa, wb);
      };
      const double q = oracle::gk(inner, za, zb);
      const Observation box{y0, y1, t0, t1, x};
      CHECK(std::abs(std::exp(loglik_censored(m, box)) - q) < 1e-8);
    }
  }

  TEST_CASE("fine intervals approach the exact contribution") {
    const auto m = curved_model(LinkKind::logit, LinkKind::cloglog, 0.6);
    const std::vector<double> x{0.2, 0.3};
    const double y = 0.5, t = 1.4, eps = 1e-6;
    const double exact = loglik_exact(m, Observation::exact(y, t, x));
    const Observation fine{y, y, t - eps, t + eps, x};
    CHECK(std::abs(loglik_censored(m, fine) - (exact + std::log(2.0 * eps))) < 1e-3);
    const Observation fine_y{y - eps, y + eps, t, t, x};
    CHECK(std::abs(loglik_censored(m, fine_y) - (exact + std::log(2.0 * eps))) < 1e-3);
  }

  TEST_CASE("strip additivity at a split point") {
    const double z = 0.4, rho = -0.6;
    for (double c : {-1.0, 0.0, 0.7}) {
      CHECK(std::abs(strip_probability(z, -kInf, c, rho) + strip_probability(z, c, kInf, rho) - norm_pdf(z)) < 1e-12);
      CHECK(std::abs(strip_probability(z, -2.0, c, rho) + strip_probability(z, c, 1.5, rho) -
                     strip_probability(z, -2.0, 1.5, rho)) < 1e-12);
    }
  }

  TEST_CASE("log-likelihood aggregation") {
    const auto m = curved_model(LinkKind::probit, LinkKind::logit, -0.7);
    auto data = censor_mixed(sample(m, 60, 5));
    CHECK(loglik(m, std::span<const Observation>(data.data(), 1)) == loglik_exact(m, data[0]));
    const std::span<const Observation> all(data);
    CHECK(loglik(m, all) == doctest::Approx(loglik(m, all.first(25)) + loglik(m, all.subspan(25))).epsilon(1e-13));
    auto shuffled = data;
    std::mt19937_64 rng(3);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(std::abs(loglik(m, all) - loglik(m, shuffled)) < 1e-12);
    CHECK_THROWS(loglik(m, std::span<const Observation>{}));

    auto bad = data;
    bad[3].x = {0.1};
    CHECK_THROWS_AS(loglik(m, bad), std::invalid_argument);
    auto crossed = data;
    crossed[2].y_lower = crossed[2].y_upper + 1.0;
    CHECK_THROWS_AS(loglik(m, crossed), std::invalid_argument);
  }

  TEST_CASE("score matches central differences") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    const LinkKind kinds[] = {LinkKind::probit, LinkKind::logit, LinkKind::cloglog};
    for (int r = 0; r < 18; ++r) {
      const auto base = curved_model(kinds[r % 3], kinds[(r / 3) % 3], 0.8 * ud(rng), r % 2 == 0);
      const auto data = censor_mixed(sample(base, 36, 100 + r));
      auto theta = base.parameters();
      for (double& v : theta) v += 0.1 * ud(rng);
      const auto m = base.with_parameters(theta);
      const auto g = score(m, data);
      for (std::size_t j = 0; j < theta.size(); ++j) {
        auto f = [&](double h) {
          auto p = theta;
          p[j] += h;
          return loglik(m.with_parameters(p), data);
        };
        const double h = 1e-4 * (1.0 + std::abs(theta[j]));
        const double d1 = (f(h) - f(-h)) / (2.0 * h);
        const double d2 = (f(2.0 * h) - f(-2.0 * h)) / (4.0 * h);
        const double fd = (4.0 * d1 - d2) / 3.0;
        CHECK(std::abs(g[j] - fd) <= 1e-6 * std::max(1.0, std::abs(g[j])));
      }
    }
  }

  TEST_CASE("dependence score cancels for mirrored data at rho = 0") {
    const auto m = identity_model(0.0);
    std::vector<Observation> data;
    for (double y : {-1.2, 0.3, 0.8})
      for (double t : {0.4, 1.7}) {
        data.push_back(Observation::exact(y, t));
        data.push_back(Observation::exact(y, -t));
      }
    // shift times to be positive; the event margin below undoes the shift
    for (auto& o : data) {
      o.t_lower += 5.0;
      o.t_upper += 5.0;
    }
    MarginalModel shifted = identity_margin();
    shifted.transform = MonotoneTransform(BernsteinBasis(1, -5.0, 15.0), {-10.0, 10.0});
    const NpbModel ms(identity_margin(), shifted, Dependence{}, {});
    const auto g = score(ms, data);
    CHECK(std::abs(g.back()) < 1e-12);
  }

  TEST_CASE("constant and gamma = 0 covariate dependence agree bit for bit") {
    const auto mc = curved_model(LinkKind::probit, LinkKind::cloglog, 0.3, false);
    NpbModel mv(mc.margin_y(), mc.margin_t(), Dependence{Dependence::Form::covariate, 0.3, {0.0}, {"x2"}},
                mc.covariate_names());
    const auto data = censor_mixed(sample(mc, 40, 9));
    CHECK(loglik(mc, data) == loglik(mv, data));
  }

  TEST_CASE("fit increases the likelihood and gives intervals") {
    const auto truth = curved_model(LinkKind::probit, LinkKind::probit, 0.6);
    auto data = sample(truth, 400, 21);
    for (std::size_t i = 0; i < data.size(); i += 3) {
      data[i].t_upper = kInf;
      data[i].t_lower *= 0.6;
    }
    FitConfig cfg;
    cfg.covariate_names = {"x1", "x2"};
    cfg.covariates_y = {"x1"};
    cfg.covariates_t = {"x1", "x2"};
    const FitResult f = fit(data, cfg);
    CHECK(f.loglik >= f.report.stage1_loglik - 1e-8);
    CHECK(f.gradient_norm < 1e-5);
    const auto g = score(f.model, data);
    for (double v : g) CHECK(std::abs(v) < 1e-5);
    CHECK(f.has_covariance());
    const Eigen::MatrixXd asym = f.covariance - f.covariance.transpose();
    CHECK(asym.cwiseAbs().maxCoeff() < 1e-12);

    const std::size_t k = f.model.parameter_count() - 1;
    const auto w = wald_interval(f, k, 0.95);
    const double se = std::sqrt(f.covariance(k, k));
    CHECK(w.lower == doctest::Approx(w.estimate - 1.959963984540054 * se));
    CHECK(w.upper == doctest::Approx(w.estimate + 1.959963984540054 * se));
    const auto ri = rho_interval(f, std::vector<double>{0.0, 0.0});
    CHECK(ri.lower > -1.0);
    CHECK(ri.upper < 1.0);
    CHECK(ri.lower <= ri.estimate);
    CHECK(ri.estimate <= ri.upper);
    CHECK(ri.lower < rho_from_lambda(0.6));
    CHECK(ri.upper > rho_from_lambda(0.6));

    const auto fi = functional_intervals(
        f, [](const NpbModel& m) { return std::vector<double>{m.rho(std::vector<double>{0.0, 0.0})}; }, 0.95, 500, 7);
    CHECK(fi[0].lower == doctest::Approx(ri.lower).epsilon(0.05));
    CHECK(fi[0].upper == doctest::Approx(ri.upper).epsilon(0.05));
  }

  TEST_CASE("duplicated covariate gives a singular Hessian") {
    const auto truth = curved_model(LinkKind::probit, LinkKind::probit, 0.3);
    auto data = sample(truth, 300, 4);
    for (auto& o : data) o.x.push_back(o.x[0]);
    FitConfig cfg;
    cfg.covariate_names = {"x1", "x2", "x1copy"};
    cfg.covariates_y = {"x1", "x1copy"};
    cfg.covariates_t = {"x1", "x2"};
    try {
      fit(data, cfg);
      FAIL("expected a singular Hessian");
    } catch (const FitError& e) {
      CHECK(e.kind() == FitError::Kind::singular_hessian);
    }
  }

  TEST_CASE("independent truth gives an unbiased correlation estimate") {
    const auto truth = curved_model(LinkKind::probit, LinkKind::probit, 0.0);
    std::vector<double> rhos;
    for (int r = 0; r < 60; ++r) {
      auto data = sample(truth, 300, 1000 + r);
      FitConfig cfg;
      cfg.covariate_names = {"x1", "x2"};
      cfg.covariates_y = {"x1"};
      cfg.covariates_t = {"x1", "x2"};
      cfg.compute_covariance = false;
      rhos.push_back(fit(data, cfg).model.rho(std::vector<double>{0.0, 0.0}));
    }
    double mean = 0.0, var = 0.0;
    for (double v : rhos) mean += v / rhos.size();
    for (double v : rhos) var += (v - mean) * (v - mean) / (rhos.size() - 1);
    CHECK(std::abs(mean) < 2.0 * std::sqrt(var / rhos.size()));
  }
}
