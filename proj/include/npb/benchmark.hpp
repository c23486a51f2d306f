#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "npb/sim.hpp"

namespace npb {

struct BenchmarkCell {
  std::string label;
  DgpConfig dgp;  // dgp.seed is ignored; the study seed drives every cell
};

struct BenchmarkConfig {
  std::vector<BenchmarkCell> cells;
  std::size_t replications = 100;
  std::uint64_t seed = 1;
  std::vector<double> time_quantiles{0.1, 0.25, 0.5, 0.75};
  std::vector<double> covariate_profiles{0.25, 0.5, 0.75};  // used by cells with a covariate
  bool empirical_baseline = true;                            // unconditional cells only
  std::size_t roc_grid = kDefaultRocGrid;
  int bernstein_order = 6;
  std::size_t threads = 0;  // 0: one per hardware thread
};

/// One design as a JSON object: n, rho, biomarker, time, censor_rate, covariates
/// (null/false, true, or {gamma_y, gamma_t}). Extra keys are left to the caller.
DgpConfig parse_dgp_config(const std::string& json_text);
std::string dgp_config_to_json(const DgpConfig& config);

/// Config file parsing. Cells that fail validation are dropped and reported in
/// `invalid`; everything else malformed is a SchemaError.
BenchmarkConfig parse_benchmark_config(const std::string& json_text, std::vector<std::string>* invalid = nullptr);
std::string benchmark_config_to_json(const BenchmarkConfig& config);

/// One estimate of one ROC curve. `profile` is NaN for unconditional cells.
struct RocRecord {
  std::size_t cell = 0;
  std::size_t replication = 0;
  std::string estimator;
  double quantile = 0.0;
  double profile = 0.0;
  double horizon = 0.0;
  double auc = 0.0;
  double true_auc = 0.0;
  double rise = 0.0;
};

/// NPB estimate on the coefficient scale; truth is NaN where the design has no
/// exact counterpart (Bernstein coefficients outside the normal/lognormal cells).
struct ParameterRecord {
  std::size_t cell = 0;
  std::size_t replication = 0;
  std::string name;
  double estimate = 0.0;
  double truth = 0.0;
};

struct FailureRecord {
  std::size_t cell = 0;
  std::size_t replication = 0;
  std::string estimator;
  std::string message;
};

struct BenchmarkReport {
  BenchmarkConfig config;
  std::vector<RocRecord> roc;
  std::vector<ParameterRecord> parameters;
  std::vector<FailureRecord> failures;
};

/// Replication r of cell c draws its data from streams (c, r) of the study seed, so
/// the report does not depend on the number of threads or the order of execution.
BenchmarkReport run_benchmark(const BenchmarkConfig& config);

/// Per cell x estimator x metric summaries (mean, SD, bias, Monte-Carlo SE, quartiles).
std::string summary_csv(const BenchmarkReport& report);
/// One row per RocRecord.
std::string replications_csv(const BenchmarkReport& report);
std::string parameters_csv(const BenchmarkReport& report);
std::string failures_csv(const BenchmarkReport& report);

/// Exact truth for the NPB coefficients of a design: Bernstein coefficients of
/// h_Y (normal biomarker, linear basis) and h_T (lognormal time, log basis) on the
/// given bases, beta = covariate shifts, lambda from rho. Unavailable entries are NaN.
std::vector<double> true_coefficients(const DgpConfig& dgp, const NpbModel& fitted);

/// Coefficient-scale view of a model: Bernstein coefficients, betas, dependence.
std::vector<double> coefficient_vector(const NpbModel& model);
std::vector<std::string> coefficient_names(const NpbModel& model);

}  // namespace npb
