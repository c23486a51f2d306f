#include "npb/optim.hpp"

#include <algorithm>
#include <cmath>

namespace npb {

OptimResult maximize_bfgs(const Objective& f, Eigen::VectorXd x0, const OptimOptions& options) {
  const Eigen::Index n = x0.size();
  OptimResult result;
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd g(n);
  double fx = f(x, &g);
  if (!std::isfinite(fx) || !g.allFinite()) {
    result.x = x;
    result.value = fx;
    result.message = "objective is not finite at the starting point";
    return result;
  }
  result.trace.push_back(fx);

  Eigen::MatrixXd inv_hessian = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  Eigen::VectorXd x_new(n);
  Eigen::VectorXd g_new(n);
  double last_change = std::numeric_limits<double>::infinity();

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const double gnorm = g.lpNorm<Eigen::Infinity>();
    if (gnorm < options.gradient_tolerance) {
      result.converged = true;
      result.message = "gradient tolerance reached";
      break;
    }

    // Ascent direction; fall back to steepest ascent when curvature info is bad.
    Eigen::VectorXd direction = inv_hessian * g;
    double slope = direction.dot(g);
    if (!(slope > 0.0) || !direction.allFinite()) {
      inv_hessian.setIdentity();
      scaled = false;
      direction = g;
      slope = g.squaredNorm();
    }

    double step = 1.0;
    double f_new = -std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * direction;
      f_new = f(x_new, &g_new);
      // a step that leaves f unchanged in double precision counts as failed
      if (std::isfinite(f_new) && g_new.allFinite() && f_new > fx && f_new >= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }

    if (!accepted) {
      if (!inv_hessian.isIdentity()) {
        inv_hessian.setIdentity();
        scaled = false;
        continue;
      }
      // No further progress representable; accept as an optimum only if the
      // last relative change was already at numerical precision.
      if (last_change < options.relative_tolerance && gnorm < 1e-3) {
        result.converged = true;
        result.message = "stalled at numerical precision";
      } else {
        result.message = "line search failed";
      }
      break;
    }

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g - g_new;  // gradient of the minimisation problem -f
    const double sy = s.dot(y);
    last_change = std::abs(f_new - fx) / std::max(1.0, std::abs(f_new));
    x = x_new;
    g = g_new;
    fx = f_new;
    result.trace.push_back(fx);
    // Log-increments heading for -inf crawl: tiny objective changes at a gradient
    // close to tolerance are accepted as convergence.
    if (last_change < options.relative_tolerance && g.lpNorm<Eigen::Infinity>() < 10.0 * options.gradient_tolerance) {
      result.converged = true;
      result.message = "relative tolerance reached";
      ++iter;
      break;
    }
    // Several increments crawling at once keep the gradient noisy; judge by the
    // objective gain over a window of accepted steps instead.
    constexpr std::size_t window = 20;
    if (result.trace.size() > window &&
        (fx - result.trace[result.trace.size() - 1 - window]) / std::max(1.0, std::abs(fx)) < options.relative_tolerance &&
        g.lpNorm<Eigen::Infinity>() < 1e-3) {
      result.converged = true;
      result.message = "objective stationary";
      ++iter;
      break;
    }

    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        inv_hessian *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = inv_hessian * y;
      const double yhy = y.dot(hy);
      inv_hessian += ((1.0 + rho * yhy) * rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    }
  }
  if (iter >= options.max_iterations && !result.converged) result.message = "iteration limit reached";

  result.x = x;
  result.value = fx;
  result.gradient_norm = g.lpNorm<Eigen::Infinity>();
  result.iterations = iter;
  return result;
}

}  // namespace npb
