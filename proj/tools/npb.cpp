// npb: fit, roc, diagnose, simulate, benchmark.
// Exit codes: 0 ok, 2 bad input, 3 optimiser did not converge, 4 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "npb/benchmark.hpp"
#include "npb/diagnostics.hpp"
#include "npb/errors.hpp"
#include "npb/io.hpp"
#include "npb/joint.hpp"
#include "npb/normal.hpp"
#include "npb/roc.hpp"
#include "npb/sim.hpp"
#include "npb/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace npb;

namespace {

constexpr const char* kFileVersion = "1.0";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) { return std::isnan(v) ? "" : format_double(v); }

json header(const std::string& format) {
  return json{{"format", format}, {"version", kFileVersion}, {"npb_version", kVersion}};
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaError(path + ": not valid JSON: " + e.what());
  }
}

std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(parse_double(item));
    } catch (const std::invalid_argument&) {
      throw SchemaError(what + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw SchemaError(what + " is empty");
  return out;
}

// "age=60,sex=1" -> covariate vector in model order
std::vector<double> parse_profile(const std::string& text, const std::vector<std::string>& names) {
  std::map<std::string, double> kv;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw SchemaError("profile entry '" + item + "' is not name=value");
    const std::string key = item.substr(0, eq);
    try {
      kv[key] = parse_double(item.substr(eq + 1));
    } catch (const std::invalid_argument&) {
      throw SchemaError("profile entry '" + item + "': value is not a number");
    }
    if (std::find(names.begin(), names.end(), key) == names.end())
      throw SchemaError("profile names unknown covariate '" + key + "'");
  }
  std::vector<double> x;
  for (const auto& n : names) {
    const auto it = kv.find(n);
    if (it == kv.end()) throw SchemaError("profile '" + text + "' has no value for covariate '" + n + "'");
    if (!std::isfinite(it->second)) throw SchemaError("profile value for '" + n + "' must be finite");
    x.push_back(it->second);
  }
  return x;
}

std::string interval_text(const Interval& iv, bool with_ci) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << iv.estimate;
  if (with_ci) os << " (" << iv.lower << ", " << iv.upper << ")";
  return os.str();
}

std::optional<std::size_t> find_parameter(const FitResult& f, const std::string& name) {
  for (std::size_t k = 0; k < f.parameter_names.size(); ++k)
    if (f.parameter_names[k] == name) return k;
  return std::nullopt;
}

// ---- fit

struct FitArgs {
  std::string data, config, out, summary;
};

int cmd_fit(const FitArgs& a) {
  const FitConfig cfg = parse_fit_config(read_text_file(a.config));
  const ObservationTable table = read_observations_csv(a.data);
  const std::vector<Observation> data = select_covariates(table, cfg.covariate_names);
  const FitResult f = fit(data, cfg);
  save_model(stored_from_fit(f, data.size()), a.out);

  const bool ci = f.has_covariance();
  std::ostringstream os;
  os << "npb fit: " << data.size() << " observations, log-likelihood " << format_double(f.loglik) << ", "
     << f.report.iterations << " iterations\n";
  if (!f.report.boundary_parameters.empty())
    os << f.report.boundary_parameters.size() << " Bernstein increment(s) on the monotonicity boundary\n";
  os << "\nCovariate effects, estimate (95% CI):\n";
  os << "  covariate            biomarker                 event time\n";
  std::vector<std::string> covs = cfg.covariates_y;
  for (const auto& c : cfg.covariates_t)
    if (std::find(covs.begin(), covs.end(), c) == covs.end()) covs.push_back(c);
  for (const auto& c : covs) {
    std::string cols[2];
    const char* prefix[2] = {"y", "t"};
    for (int m = 0; m < 2; ++m) {
      const auto k = find_parameter(f, std::string(prefix[m]) + ".beta[" + c + "]");
      cols[m] = k ? interval_text(ci ? wald_interval(f, *k) : Interval{f.model.parameters()[*k], 0, 0}, ci) : "-";
    }
    os << "  " << c << std::string(c.size() < 21 ? 21 - c.size() : 1, ' ') << cols[0]
       << std::string(cols[0].size() < 26 ? 26 - cols[0].size() : 1, ' ') << cols[1] << "\n";
  }

  // conditional correlation; with a covariate-dependent rho it is reported at the covariate means
  std::vector<double> xbar(cfg.covariate_names.size(), 0.0);
  for (const auto& o : data)
    for (std::size_t j = 0; j < xbar.size(); ++j) xbar[j] += o.x[j] / static_cast<double>(data.size());
  const Interval cond = ci ? rho_interval(f, xbar) : Interval{f.model.rho(xbar), 0, 0};
  os << "\nCorrelation, estimate (95% CI):\n";
  os << "  conditional    " << interval_text(cond, ci);
  if (f.model.dependence().form != Dependence::Form::constant) os << "  (at covariate means)";
  os << "\n";

  const bool has_covariates = !cfg.covariates_y.empty() || !cfg.covariates_t.empty() ||
                              cfg.dependence != Dependence::Form::constant;
  if (!has_covariates) {
    os << "  unconditional  " << interval_text(cond, ci) << "\n";
  } else {
    FitConfig plain = cfg;
    plain.covariates_y.clear();
    plain.covariates_t.clear();
    plain.covariates_dependence.clear();
    plain.dependence = Dependence::Form::constant;
    try {
      const FitResult u = fit(data, plain);
      os << "  unconditional  " << interval_text(u.has_covariance() ? rho_interval(u, xbar) : Interval{u.model.rho(xbar), 0, 0},
                                                 u.has_covariance())
         << "\n";
    } catch (const std::exception& e) {
      os << "  unconditional  unavailable (" << e.what() << ")\n";
    }
  }

  if (a.summary.empty())
    std::cout << os.str();
  else
    write_text_file(a.summary, os.str());
  return 0;
}

// ---- roc

struct RocArgs {
  std::string model, horizons, profiles_csv, population_csv, points, out;
  std::vector<std::string> profiles;
  std::size_t grid = kDefaultRocGrid;
  double level = 0.95;
  std::size_t draws = 2000;
  std::uint64_t seed = 1;
};

const char* kRocMetrics[] = {"auc", "youden", "threshold", "sensitivity", "specificity"};

std::vector<double> roc_summary(const NpbModel& m, double t, const std::vector<double>& x, std::size_t grid) {
  const YoudenResult y = youden(m, t, x, grid);
  return {auc(m, t, x, grid), y.index, y.threshold, y.sensitivity, y.specificity};
}

int cmd_roc(const RocArgs& a) {
  const StoredModel stored = load_model(a.model);
  const FitResult f = fit_from_stored(stored);
  const NpbModel& m = f.model;
  const auto& names = m.covariate_names();
  if (!(a.level > 0.0 && a.level < 1.0)) throw SchemaError("--level must lie in (0, 1)");
  if (a.grid < 2) throw SchemaError("--grid must be at least 2");

  const std::vector<double> horizons = parse_number_list(a.horizons, "--horizons");

  std::vector<std::vector<double>> profiles;
  for (const auto& p : a.profiles) profiles.push_back(parse_profile(p, names));
  if (!a.profiles_csv.empty()) {
    const auto rows = covariate_rows(parse_numeric_csv(read_text_file(a.profiles_csv)), names);
    profiles.insert(profiles.end(), rows.begin(), rows.end());
  }
  if (profiles.empty()) {
    if (!names.empty()) throw SchemaError("the model has covariates; give --profile or --profiles");
    profiles.push_back({});
  }
  std::vector<std::vector<double>> population;
  if (!a.population_csv.empty())
    population = covariate_rows(parse_numeric_csv(read_text_file(a.population_csv)), names);

  const bool ci = f.has_covariance();
  auto intervals = [&](const Functional& fn) {
    if (ci) return functional_intervals(f, fn, a.level, a.draws, a.seed);
    std::vector<Interval> out;
    for (double v : fn(m)) out.push_back({v, kNaN, kNaN});
    return out;
  };

  std::ostringstream pts;
  pts << "profile";
  for (const auto& n : names) pts << "," << n;
  pts << ",horizon,threshold,fpr,tpr\n";

  json results = json::array();
  json pop = json::array();
  std::ostringstream csv;
  csv << "profile";
  for (const auto& n : names) csv << "," << n;
  csv << ",horizon";
  for (const char* k : kRocMetrics) csv << "," << k << "," << k << "_lower," << k << "_upper";
  csv << "\n";

  for (std::size_t p = 0; p < profiles.size(); ++p) {
    const auto& x = profiles[p];
    for (double t : horizons) {
      const RocCurve curve = roc_curve(m, t, x, a.grid);
      for (std::size_t i = 0; i < curve.fpr.size(); ++i) {
        pts << p + 1;
        for (double v : x) pts << "," << format_double(v);
        pts << "," << format_double(t) << "," << format_double(curve.thresholds[i]) << "," << format_double(curve.fpr[i])
            << "," << format_double(curve.tpr[i]) << "\n";
      }
      const auto iv = intervals([&](const NpbModel& mm) { return roc_summary(mm, t, x, a.grid); });

      json r{{"profile", p + 1}, {"horizon", t}};
      json xj = json::object();
      for (std::size_t j = 0; j < names.size(); ++j) xj[names[j]] = x[j];
      r["covariates"] = xj;
      csv << p + 1;
      for (double v : x) csv << "," << format_double(v);
      csv << "," << format_double(t);
      for (std::size_t k = 0; k < iv.size(); ++k) {
        r[kRocMetrics[k]] = {{"estimate", iv[k].estimate}, {"lower", iv[k].lower}, {"upper", iv[k].upper}};
        csv << "," << fmt(iv[k].estimate) << "," << fmt(iv[k].lower) << "," << fmt(iv[k].upper);
      }
      csv << "\n";
      results.push_back(r);
    }
  }

  // per-row mean AUC over the supplied table
  if (!population.empty()) {
    for (double t : horizons) {
      const auto iv = intervals([&](const NpbModel& mm) {
        double s = 0.0;
        for (const auto& x : population) s += auc(mm, t, x, a.grid);
        return std::vector<double>{s / static_cast<double>(population.size())};
      });
      pop.push_back({{"horizon", t},
                     {"rows", population.size()},
                     {"auc", {{"estimate", iv[0].estimate}, {"lower", iv[0].lower}, {"upper", iv[0].upper}}}});
      csv << "population";
      for (std::size_t j = 0; j < names.size(); ++j) csv << ",";
      csv << "," << format_double(t) << "," << fmt(iv[0].estimate) << "," << fmt(iv[0].lower) << "," << fmt(iv[0].upper);
      for (std::size_t k = 1; k < std::size(kRocMetrics); ++k) csv << ",,,";
      csv << "\n";
    }
  }

  if (!a.points.empty()) write_text_file(a.points, pts.str());
  if (fs::path(a.out).extension() == ".json") {
    json j = header("npb-roc");
    j["model"] = a.model;
    j["level"] = a.level;
    j["grid"] = a.grid;
    j["intervals"] = ci ? json{{"method", "parameter draws"}, {"draws", a.draws}, {"seed", a.seed}} : json(nullptr);
    j["results"] = results;
    j["population"] = pop;
    write_text_file(a.out, j.dump(2) + "\n");
  } else {
    write_text_file(a.out, csv.str());
  }
  return 0;
}

// ---- diagnose

struct DiagnoseArgs {
  std::string model, data, out, summary;
  std::uint64_t seed = 1;
  bool km = false;
};

json ks_json(const std::vector<double>& u) {
  const QqResult q = qq_uniform(u);
  return {{"ks_statistic", q.ks_statistic}, {"p_value", q.ks_p_value}};
}

int cmd_diagnose(const DiagnoseArgs& a) {
  const StoredModel stored = load_model(a.model);
  const ObservationTable table = read_observations_csv(a.data);
  const std::vector<Observation> data = select_covariates(table, stored.model.covariate_names());
  const auto u1 = a.km ? pit_event_time(kaplan_meier(data), data, a.seed) : pit_event_time(stored.model, data, a.seed);
  const auto u2 = pit_biomarker_conditional(stored.model, data, a.seed);

  std::ostringstream csv;
  csv << "row,u1,u2,censored\n";
  std::size_t censored = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const bool c = !data[i].t_exact();
    censored += c;
    csv << i + 1 << "," << format_double(u1[i]) << "," << format_double(u2[i]) << "," << (c ? 1 : 0) << "\n";
  }
  write_text_file(a.out, csv.str());

  json j = header("npb-diagnostics");
  j["n"] = data.size();
  j["censored"] = censored;
  j["seed"] = a.seed;
  j["u1_reference"] = a.km ? "kaplan-meier" : "model";
  j["u1"] = ks_json(u1);
  j["u2"] = ks_json(u2);
  const std::string text = j.dump(2) + "\n";
  if (a.summary.empty())
    std::cout << text;
  else
    write_text_file(a.summary, text);
  return 0;
}

// ---- simulate

struct SimulateArgs {
  std::string config, out_dir;
};

std::string times_csv(const SimulatedData& d) {
  std::ostringstream os;
  os << "row,event_time,censoring_time\n";
  for (std::size_t i = 0; i < d.event_time.size(); ++i)
    os << i + 1 << "," << format_double(d.event_time[i]) << "," << format_double(d.censoring_time[i]) << "\n";
  return os.str();
}

int cmd_simulate(const SimulateArgs& a) {
  const json j = parse_json_file(a.config);
  if (!j.is_object()) throw SchemaError("simulation config must be a JSON object");
  const std::string scenario = j.value("scenario", "copula");
  const std::uint64_t replication = j.value("replication", std::uint64_t{0});
  const json truth_cfg = j.value("truth", json::object());
  const std::size_t grid = truth_cfg.value("roc_grid", kDefaultRocGrid);

  fs::create_directories(a.out_dir);
  json manifest = header("npb-simulation-manifest");
  manifest["scenario"] = scenario;
  manifest["replication"] = replication;
  std::ostringstream truth;
  SimulatedData data;

  if (scenario == "copula") {
    DgpConfig d = parse_dgp_config(j.dump());
    d.seed = j.value("seed", std::uint64_t{1});
    const std::uint64_t cell = j.value("cell", std::uint64_t{0});
    data = generate_dataset(d, cell, replication);
    json cfg = json::parse(dgp_config_to_json(d));
    cfg["seed"] = d.seed;
    cfg["cell"] = cell;
    manifest["seed"] = d.seed;
    manifest["streams"] = {{"dataset", {cell, replication}}, {"censoring", {cell, replication}}};

    const auto qs = truth_cfg.value("time_quantiles", std::vector<double>{0.1, 0.25, 0.5, 0.75});
    const auto xs = truth_cfg.value("covariate_profiles", std::vector<double>{0.25, 0.5, 0.75});
    truth << "quantile,profile,horizon,auc\n";
    for (double q : qs) {
      if (d.covariates) {
        for (double x : xs) {
          const double t = conditional_event_time_quantile(d, q, x);
          truth << format_double(q) << "," << format_double(x) << "," << format_double(t) << ","
                << format_double(true_roc(d, t, x, grid).auc) << "\n";
        }
      } else {
        const double t = event_time_quantile(d, q);
        truth << format_double(q) << ",," << format_double(t) << "," << format_double(true_roc(d, t, std::nullopt, grid).auc)
              << "\n";
      }
    }
    cfg["truth"] = {{"time_quantiles", qs}, {"covariate_profiles", xs}, {"roc_grid", grid}};
    manifest["config"] = cfg;
  } else if (scenario == "misspecification") {
    MisspecConfig mc;
    mc.n = j.value("n", mc.n);
    mc.censor_rate = j.value("censor_rate", mc.censor_rate);
    mc.seed = j.value("seed", mc.seed);
    data = misspecification_scenario(mc, replication);
    manifest["seed"] = mc.seed;
    manifest["streams"] = {{"dataset", {0, replication}}, {"censoring", {0, replication}}};

    const auto hs = truth_cfg.value("horizons", std::vector<double>{1.5});
    // covariate quartiles and median of X ~ N(1, 1)
    const auto xs = truth_cfg.value("covariate_profiles",
                                    std::vector<double>{1.0 + norm_quantile(0.25), 1.0, 1.0 + norm_quantile(0.75)});
    truth << "horizon,profile,auc\n";
    for (double t : hs)
      for (double x : xs)
        truth << format_double(t) << "," << format_double(x) << "," << format_double(misspecification_true_roc(t, x, grid).auc)
              << "\n";
    manifest["config"] = {{"scenario", scenario},
                          {"n", mc.n},
                          {"censor_rate", mc.censor_rate},
                          {"seed", mc.seed},
                          {"replication", replication},
                          {"truth", {{"horizons", hs}, {"covariate_profiles", xs}, {"roc_grid", grid}}}};
  } else {
    throw SchemaError("unknown scenario '" + scenario + "' (expected copula or misspecification)");
  }
  manifest["config"]["scenario"] = scenario;
  manifest["config"]["replication"] = replication;

  const fs::path dir(a.out_dir);
  write_text_file((dir / "data.csv").string(), observations_to_csv(data.observations, data.covariate_names));
  write_text_file((dir / "times.csv").string(), times_csv(data));
  write_text_file((dir / "truth.csv").string(), truth.str());
  manifest["files"] = {"data.csv", "times.csv", "truth.csv"};
  write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
  return 0;
}

// ---- benchmark

struct BenchmarkArgs {
  std::string config, out_dir;
  std::optional<std::size_t> threads;
};

int cmd_benchmark(const BenchmarkArgs& a) {
  json j = parse_json_file(a.config);
  // a manifest from an earlier run carries the config it was run with
  if (j.is_object() && j.value("format", "") == "npb-benchmark-manifest") {
    const std::string v = j.value("version", "");
    if (v.substr(0, v.find('.')) != "1") throw SchemaError("unsupported manifest version '" + v + "'");
    j = j.at("config");
  }
  std::vector<std::string> invalid;
  BenchmarkConfig cfg = parse_benchmark_config(j.dump(), &invalid);
  for (const auto& msg : invalid) std::cerr << "npb benchmark: skipping invalid " << msg << "\n";
  if (cfg.cells.empty()) throw SchemaError("no valid scenario cells");
  if (a.threads) cfg.threads = *a.threads;

  const BenchmarkReport report = run_benchmark(cfg);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  write_text_file((dir / "summary.csv").string(), summary_csv(report));
  write_text_file((dir / "replications.csv").string(), replications_csv(report));
  write_text_file((dir / "parameters.csv").string(), parameters_csv(report));
  write_text_file((dir / "failures.csv").string(), failures_csv(report));

  json manifest = header("npb-benchmark-manifest");
  manifest["config"] = json::parse(benchmark_config_to_json(cfg));
  manifest["invalid_cells"] = invalid;
  manifest["files"] = {"summary.csv", "replications.csv", "parameters.csv", "failures.csv"};
  manifest["failures"] = report.failures.size();
  write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
  if (!invalid.empty()) std::cerr << "npb benchmark: " << invalid.size() << " cell(s) skipped\n";
  return 0;
}

int guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const FitError& e) {
    std::cerr << "npb: " << e.what() << "\n";
    return e.kind() == FitError::Kind::non_convergence ? 3 : 4;
  } catch (const NumericError& e) {
    std::cerr << "npb: numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "npb: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "npb: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonparanormal prognostic biomarker models"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a CSV of observations");
  fit_cmd->add_option("--data", fa.data, "Observation CSV")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--config", fa.config, "Fit config (JSON)")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--out", fa.out, "Model file to write")->required();
  fit_cmd->add_option("--summary", fa.summary, "Write the text summary here instead of stdout");

  RocArgs ra;
  auto* roc_cmd = app.add_subcommand("roc", "Time-dependent ROC summaries of a fitted model");
  roc_cmd->add_option("--model", ra.model)->required()->check(CLI::ExistingFile);
  roc_cmd->add_option("--horizons", ra.horizons, "Comma-separated horizons")->required();
  roc_cmd->add_option("--profile", ra.profiles, "Covariate profile name=value,...; repeatable");
  roc_cmd->add_option("--profiles", ra.profiles_csv, "CSV of covariate profiles")->check(CLI::ExistingFile);
  roc_cmd->add_option("--population", ra.population_csv, "CSV of covariate rows for the population-averaged AUC")
      ->check(CLI::ExistingFile);
  roc_cmd->add_option("--grid", ra.grid, "Thresholds per curve");
  roc_cmd->add_option("--level", ra.level, "Interval level");
  roc_cmd->add_option("--draws", ra.draws, "Parameter draws for intervals");
  roc_cmd->add_option("--seed", ra.seed);
  roc_cmd->add_option("--points", ra.points, "CSV of ROC points");
  roc_cmd->add_option("--out", ra.out, "Summary file (.json for JSON, otherwise CSV)")->required();

  DiagnoseArgs da;
  auto* diag_cmd = app.add_subcommand("diagnose", "Probability integral transforms and KS tests");
  diag_cmd->add_option("--model", da.model)->required()->check(CLI::ExistingFile);
  diag_cmd->add_option("--data", da.data)->required()->check(CLI::ExistingFile);
  diag_cmd->add_option("--seed", da.seed);
  diag_cmd->add_option("--out", da.out, "PIT CSV")->required();
  diag_cmd->add_option("--summary", da.summary, "KS summary JSON (stdout if omitted)");
  diag_cmd->add_flag("--km", da.km, "Event-time PIT against the Kaplan-Meier estimate");

  SimulateArgs sa;
  auto* sim_cmd = app.add_subcommand("simulate", "Draw one dataset from a simulation design");
  sim_cmd->add_option("--config", sa.config)->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--out-dir", sa.out_dir)->required();

  BenchmarkArgs ba;
  auto* bench_cmd = app.add_subcommand("benchmark", "Run a simulation study");
  bench_cmd->add_option("--config", ba.config, "Benchmark config or an earlier manifest.json")
      ->required()
      ->check(CLI::ExistingFile);
  bench_cmd->add_option("--out-dir", ba.out_dir)->required();
  bench_cmd->add_option("--threads", ba.threads, "Worker threads (0: all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (*fit_cmd) return guarded([&] { return cmd_fit(fa); });
  if (*roc_cmd) return guarded([&] { return cmd_roc(ra); });
  if (*diag_cmd) return guarded([&] { return cmd_diagnose(da); });
  if (*sim_cmd) return guarded([&] { return cmd_simulate(sa); });
  return guarded([&] { return cmd_benchmark(ba); });
}
