#include <doctest.h>

#include <cmath>
#include <sstream>

#include "npb/benchmark.hpp"
#include "npb/bernstein.hpp"
#include "npb/errors.hpp"

using namespace npb;

namespace {

BenchmarkConfig small_config() {
  BenchmarkConfig cfg;
  cfg.replications = 3;
  cfg.seed = 42;
  cfg.roc_grid = 64;
  DgpConfig a;
  a.n = 150;
  a.biomarker = BiomarkerDist::chisq;
  a.time = TimeDist::gamma;
  DgpConfig b = a;
  b.biomarker = BiomarkerDist::normal;
  b.time = TimeDist::lognormal;
  b.covariates = CovariateEffects{};
  cfg.cells = {{"chisq-gamma", a}, {"normal-lognormal-x", b}};
  return cfg;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_SUITE("benchmark") {
  TEST_CASE("R = 1 smoke run emits every column") {
    auto cfg = small_config();
    cfg.replications = 1;
    const auto report = run_benchmark(cfg);
    const std::string summary = summary_csv(report);
    std::istringstream in(summary);
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "cell,label,n,rho,censor_rate,biomarker,time,covariates,estimator,metric,quantile,profile,truth,count,"
          "failures,mean,sd,bias,mc_se,median,q25,q75");
    std::string line;
    while (std::getline(in, line)) CHECK(std::count(line.begin(), line.end(), ',') == 21);
    // cell 0: 4 quantiles x 2 estimators x 2 metrics; cell 1: 4 x 3 profiles x npb x 2 metrics
    CHECK(summary.find(",npb,auc,") != std::string::npos);
    CHECK(summary.find(",empirical_ipcw,rise,") != std::string::npos);
    CHECK(summary.find("param:y.theta0") != std::string::npos);
    CHECK(report.roc.size() == 8 + 12);
    CHECK(count_lines(replications_csv(report)) == 1 + report.roc.size());
  }

  TEST_CASE("reports do not depend on the number of threads") {
    auto cfg = small_config();
    cfg.threads = 1;
    const auto a = run_benchmark(cfg);
    cfg.threads = 3;
    const auto b = run_benchmark(cfg);
    CHECK(summary_csv(a) == summary_csv(b));
    CHECK(replications_csv(a) == replications_csv(b));
    CHECK(parameters_csv(a) == parameters_csv(b));
  }

  TEST_CASE("config round trip and invalid cells") {
    const auto cfg = small_config();
    const auto back = parse_benchmark_config(benchmark_config_to_json(cfg));
    CHECK(benchmark_config_to_json(back) == benchmark_config_to_json(cfg));
    const std::string text = R"({"replications": 2, "cells": [
      {"label": "ok", "n": 100, "rho": -0.5, "biomarker": "normal", "time": "weibull"},
      {"label": "bad-rho", "n": 100, "rho": 1.5, "biomarker": "normal", "time": "weibull"},
      {"label": "bad-dist", "n": 100, "rho": 0.1, "biomarker": "cauchy", "time": "weibull"}]})";
    std::vector<std::string> invalid;
    const auto parsed = parse_benchmark_config(text, &invalid);
    CHECK(parsed.cells.size() == 1);
    REQUIRE(invalid.size() == 2);
    CHECK(invalid[0].find("bad-rho") != std::string::npos);
    CHECK(invalid[1].find("cauchy") != std::string::npos);
    CHECK_THROWS_AS(parse_benchmark_config(text), SchemaError);
    CHECK_THROWS_AS(parse_benchmark_config("[]"), SchemaError);
  }

  TEST_CASE("true coefficients of the probit-normal design") {
    DgpConfig dgp;
    dgp.n = 20000;
    dgp.biomarker = BiomarkerDist::normal;
    dgp.time = TimeDist::lognormal;
    dgp.covariates = CovariateEffects{};
    dgp.censor_rate = 0.3;
    const auto data = generate_dataset(dgp, 0, 0);
    FitConfig fc;
    fc.covariate_names = {"x"};
    fc.covariates_y = fc.covariates_t = {"x"};
    fc.compute_covariance = false;
    const auto f = fit(data.observations, fc);
    const auto truth = true_coefficients(dgp, f.model);
    const auto names = coefficient_names(f.model);
    REQUIRE(truth.size() == coefficient_vector(f.model).size());
    for (std::size_t k = 0; k < truth.size(); ++k) {
      INFO(names[k]);
      CHECK_FALSE(std::isnan(truth[k]));
    }
    // the true coefficients reproduce h_Y(y) = y and h_T(t) = log t
    const MonotoneTransform hy(f.model.margin_y().transform.basis(), std::vector<double>(truth.begin(), truth.begin() + 7));
    const MonotoneTransform ht(f.model.margin_t().transform.basis(),
                               std::vector<double>(truth.begin() + 7, truth.begin() + 14));
    for (double v : {-2.0, -0.5, 0.0, 1.3, 2.2}) {
      CHECK(hy(v) == doctest::Approx(v).epsilon(1e-12).scale(1.0));
      CHECK(ht(std::exp(v)) == doctest::Approx(v).epsilon(1e-12).scale(1.0));
    }
    CHECK(truth[14] == 0.5);
    CHECK(truth[15] == 3.0);
    // Individual coefficients are strongly collinear, so the fit is compared on the
    // conditional latent scale h(v) - beta x at x = 0.5 over the bulk of the data.
    const std::vector<double> x{0.5};
    for (double v : {-1.5, -0.5, 0.0, 0.5, 1.5}) {
      CHECK(std::abs(f.model.latent_y(v + 0.25, x) - v) < 0.03);
      CHECK(std::abs(f.model.latent_t(std::exp(v + 1.5), x) - v) < 0.03);
    }
    CHECK(f.model.margin_y().beta[0] == doctest::Approx(0.5).epsilon(0.1));
    CHECK(f.model.margin_t().beta[0] == doctest::Approx(3.0).epsilon(0.05));
  }
}
