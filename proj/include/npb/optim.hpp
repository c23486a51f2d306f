#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace npb {

/// Objective evaluated at x; writes the gradient when `gradient` is non-null.
/// Non-finite values are treated as infeasible points by the line search.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* gradient)>;

struct OptimOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;   // infinity norm
  double relative_tolerance = 1e-10;  // |f_k - f_{k-1}| / max(1, |f_k|)
};

struct OptimResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
  std::vector<double> trace;  // objective after each accepted step
};

/// BFGS maximisation with an Armijo backtracking line search.
OptimResult maximize_bfgs(const Objective& f, Eigen::VectorXd x0, const OptimOptions& options = {});

}  // namespace npb
