#pragma once

// Models and samples shared by the unit tests.

#include <cmath>
#include <random>
#include <vector>

#include "npb/joint.hpp"
#include "npb/normal.hpp"

namespace fixtures {

using namespace npb;


inline MarginalModel identity_margin() {
  return {LinkFunction{LinkKind::probit}, MonotoneTransform(BernsteinBasis(1, -10.0, 10.0), {-10.0, 10.0}), {}, {}};
}

inline NpbModel identity_model(double lambda) {
  return NpbModel(identity_margin(), identity_margin(), Dependence{Dependence::Form::constant, lambda, {}, {}}, {});
}

// Y standard normal, log T standard normal; x carries two unused covariates.
inline NpbModel lognormal_model(double lambda) {
  MarginalModel mt{LinkFunction{LinkKind::probit},
                   MonotoneTransform(BernsteinBasis(1, -10.0, 10.0, true), {-10.0, 10.0}), {}, {}};
  return NpbModel(identity_margin(), mt, Dependence{Dependence::Form::constant, lambda, {}, {}}, {"x1", "x2"});
}

// A model with curved margins, covariates and every link represented.
inline NpbModel curved_model(LinkKind ly, LinkKind lt, double lambda, bool covariate_dependence = false) {
  MarginalModel my{LinkFunction{ly}, MonotoneTransform(BernsteinBasis(6, -3.0, 4.0), {-2.5, -1.4, -0.8, 0.1, 0.7, 1.9, 2.8}),
                   {0.6},
                   {"x1"}};
  MarginalModel mt{LinkFunction{lt},
                   MonotoneTransform(BernsteinBasis(6, -2.5, 2.5, true), {-3.0, -1.8, -0.9, -0.2, 0.6, 1.1, 2.9}),
                   {-0.4, 1.2},
                   {"x1", "x2"}};
  Dependence dep{Dependence::Form::constant, lambda, {}, {}};
  if (covariate_dependence) dep = Dependence{Dependence::Form::covariate, lambda, {0.5}, {"x2"}};
  return NpbModel(my, mt, dep, {"x1", "x2"});
}

// Observations sampled from a model on the probit scale.
inline std::vector<Observation> sample(const NpbModel& m, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud;
  std::vector<Observation> data;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x{ud(rng), ud(rng) - 0.5};
    const double r = m.rho(x);
    const double z1 = nd(rng);
    const double z2 = r * z1 + std::sqrt(1.0 - r * r) * nd(rng);
    const double y = m.quantile_y(norm_cdf(z1), x);
    const double t = m.quantile_t(norm_cdf(z2), x);
    data.push_back(Observation::exact(y, t, x));
  }
  return data;
}

// Mixed censoring patterns applied cyclically.
inline std::vector<Observation> censor_mixed(std::vector<Observation> data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    Observation& o = data[i];
    switch (i % 6) {
      case 1: o.t_upper = kInf; o.t_lower *= 0.7; break;                     // right-censored
      case 2: o.t_lower *= 0.8; o.t_upper *= 1.25; break;                    // interval-censored time
      case 3: o.y_upper = o.y_lower + 0.4; o.y_lower = -kInf; break;         // below detection limit
      case 4: o.y_lower -= 0.3; o.y_upper = kInf; o.t_upper = kInf; break;   // above limit, censored
      case 5: o.y_lower -= 0.2; o.y_upper += 0.3; o.t_lower *= 0.9; o.t_upper *= 1.1; break;
      default: break;
    }
  }
  return data;
}


}  // namespace fixtures
