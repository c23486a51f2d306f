#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "npb/joint.hpp"

namespace npb {

inline constexpr const char* kModelFormat = "npb-model";
inline constexpr int kModelFormatMajor = 1;
inline constexpr int kModelFormatMinor = 0;

/// A model as written to disk: the parameters plus what inference needs later.
struct StoredModel {
  NpbModel model;
  Eigen::MatrixXd covariance;  // empty when the fit skipped it
  std::optional<double> loglik;
  std::size_t n = 0;

  bool has_covariance() const noexcept { return covariance.rows() > 0; }
};

StoredModel stored_from_fit(const FitResult& fit, std::size_t n);
/// FitResult view of a stored model (for interval routines); report fields are empty.
FitResult fit_from_stored(const StoredModel& stored);

/// JSON text. Doubles are written with 17 significant digits, so reading the text
/// back reproduces every parameter bit for bit.
std::string model_to_json(const StoredModel& stored);
/// Throws SchemaError on a wrong format tag, an unknown major version or a malformed document.
StoredModel model_from_json(const std::string& text);

void save_model(const StoredModel& stored, const std::string& path);
StoredModel load_model(const std::string& path);

/// Observations read from CSV together with the covariate columns in file order.
struct ObservationTable {
  std::vector<std::string> covariate_names;
  std::vector<Observation> rows;
};

/// Reads the observation CSV schema: y_lower,y_upper,t_lower,t_upper (or the
/// shorthands y and t,status with status 1 = event, 0 = right-censored) plus
/// covariate columns. "Inf"/"-Inf" encode unbounded ends. Every problem is a
/// SchemaError naming the data row (1-based, header excluded) and column.
ObservationTable read_observations_csv(const std::string& path);
ObservationTable parse_observations_csv(const std::string& text);

/// Reorders covariates to `names`; a missing column is a SchemaError.
std::vector<Observation> select_covariates(const ObservationTable& table, const std::vector<std::string>& names);

/// Plain numeric table (header row, finite numbers only), e.g. covariate profiles.
struct NumericTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};
NumericTable parse_numeric_csv(const std::string& text);
/// Rows of `table` as covariate vectors ordered by `names`; missing columns are a SchemaError.
std::vector<std::vector<double>> covariate_rows(const NumericTable& table, const std::vector<std::string>& names);

/// Fit settings from JSON:
///   {"margins": {"y": {"order": 6, "link": "probit", "log_scale": null, "lower": null, "upper": null}, "t": {...}},
///    "covariates_y": [...], "covariates_t": [...],
///    "dependence": {"form": "constant" | "covariate", "covariates": [...]},
///    "optim": {"max_iterations": 500, "gradient_tolerance": 1e-6, "relative_tolerance": 1e-10},
///    "covariance": true}
/// Every key is optional. covariate_names becomes the union of the referenced
/// covariates in order of first appearance (y, then t, then dependence).
FitConfig parse_fit_config(const std::string& json_text);

std::string observations_to_csv(const std::vector<Observation>& rows, const std::vector<std::string>& covariate_names);

/// Shortest decimal text that reads back to the same double; "Inf"/"-Inf"/"NaN" otherwise.
std::string format_double(double v);
double parse_double(const std::string& text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace npb
