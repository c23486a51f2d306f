#include "npb/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "npb/errors.hpp"
#include "npb/io.hpp"
#include "npb/normal.hpp"

namespace npb {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

DgpConfig cell_from_json(const json& j) {
  DgpConfig d;
  d.n = j.at("n").get<std::size_t>();
  d.rho = j.at("rho").get<double>();
  d.biomarker = parse_biomarker_dist(j.at("biomarker").get<std::string>());
  d.time = parse_time_dist(j.at("time").get<std::string>());
  d.censor_rate = j.value("censor_rate", 0.3);
  if (j.contains("covariates") && !j["covariates"].is_null() && j["covariates"] != false) {
    CovariateEffects e;
    if (j["covariates"].is_object()) {
      e.gamma_y = j["covariates"].value("gamma_y", e.gamma_y);
      e.gamma_t = j["covariates"].value("gamma_t", e.gamma_t);
    }
    d.covariates = e;
  }
  validate(d);
  return d;
}

json cell_to_json(const BenchmarkCell& c) {
  json j{{"label", c.label},
         {"n", c.dgp.n},
         {"rho", c.dgp.rho},
         {"biomarker", to_string(c.dgp.biomarker)},
         {"time", to_string(c.dgp.time)},
         {"censor_rate", c.dgp.censor_rate}};
  if (c.dgp.covariates)
    j["covariates"] = {{"gamma_y", c.dgp.covariates->gamma_y}, {"gamma_t", c.dgp.covariates->gamma_t}};
  else
    j["covariates"] = nullptr;
  return j;
}

struct TaskResult {
  std::vector<RocRecord> roc;
  std::vector<ParameterRecord> parameters;
  std::vector<FailureRecord> failures;
};

struct Target {
  double quantile;
  double profile;  // NaN: unconditional
  double horizon;
  RocCurve truth;
};

std::vector<Target> targets_for(const BenchmarkConfig& cfg, const DgpConfig& dgp) {
  std::vector<Target> out;
  for (double q : cfg.time_quantiles) {
    if (dgp.covariates) {
      for (double x : cfg.covariate_profiles) {
        const double t = conditional_event_time_quantile(dgp, q, x);
        out.push_back({q, x, t, true_roc(dgp, t, x, cfg.roc_grid)});
      }
    } else {
      const double t = event_time_quantile(dgp, q);
      out.push_back({q, kNaN, t, true_roc(dgp, t, std::nullopt, cfg.roc_grid)});
    }
  }
  return out;
}

TaskResult run_task(const BenchmarkConfig& cfg, std::size_t cell, std::size_t rep, const std::vector<Target>& targets) {
  TaskResult res;
  DgpConfig dgp = cfg.cells[cell].dgp;
  dgp.seed = cfg.seed;
  const SimulatedData data = generate_dataset(dgp, cell, rep);

  try {
    FitConfig fc;
    fc.margin_y.order = cfg.bernstein_order;
    fc.margin_t.order = cfg.bernstein_order;
    fc.covariate_names = data.covariate_names;
    if (dgp.covariates) fc.covariates_y = fc.covariates_t = {"x"};
    fc.compute_covariance = false;
    const FitResult f = fit(data.observations, fc);
    for (const Target& tg : targets) {
      std::vector<double> x;
      if (!std::isnan(tg.profile)) x = {tg.profile};
      const RocCurve est = roc_curve(f.model, tg.horizon, x, cfg.roc_grid);
      res.roc.push_back({cell, rep, "npb", tg.quantile, tg.profile, tg.horizon, est.auc, tg.truth.auc, rise(est, tg.truth)});
    }
    const auto names = coefficient_names(f.model);
    const auto est = coefficient_vector(f.model);
    const auto truth = true_coefficients(dgp, f.model);
    for (std::size_t k = 0; k < names.size(); ++k) res.parameters.push_back({cell, rep, names[k], est[k], truth[k]});
    if (f.model.dependence().form == Dependence::Form::constant)
      res.parameters.push_back({cell, rep, "rho", rho_from_lambda(f.model.dependence().alpha), dgp.rho});
  } catch (const std::exception& e) {
    res.failures.push_back({cell, rep, "npb", e.what()});
  }

  if (cfg.empirical_baseline && !dgp.covariates) {
    for (const Target& tg : targets) {
      try {
        const RocCurve est = empirical_baseline_roc(data.observations, tg.horizon);
        res.roc.push_back(
            {cell, rep, "empirical_ipcw", tg.quantile, tg.profile, tg.horizon, est.auc, tg.truth.auc, rise(est, tg.truth)});
      } catch (const std::exception& e) {
        res.failures.push_back({cell, rep, "empirical_ipcw", "q=" + format_double(tg.quantile) + ": " + e.what()});
      }
    }
  }
  return res;
}

// Type-7 sample quantile of sorted data.
double quantile7(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return kNaN;
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string fmt(double v) { return std::isnan(v) ? "" : format_double(v); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string cell_columns(const BenchmarkCell& c) {
  return csv_field(c.label) + "," + std::to_string(c.dgp.n) + "," + fmt(c.dgp.rho) + "," + fmt(c.dgp.censor_rate) + "," +
         to_string(c.dgp.biomarker) + "," + to_string(c.dgp.time) + "," + (c.dgp.covariates ? "1" : "0");
}

struct Summary {
  std::size_t count = 0;
  double mean = kNaN, sd = kNaN, median = kNaN, q25 = kNaN, q75 = kNaN;
};

Summary summarize(std::vector<double> v) {
  Summary s;
  s.count = v.size();
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  std::sort(v.begin(), v.end());
  s.median = quantile7(v, 0.5);
  s.q25 = quantile7(v, 0.25);
  s.q75 = quantile7(v, 0.75);
  return s;
}

}  // namespace

DgpConfig parse_dgp_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("design config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("design config must be a JSON object");
  try {
    return cell_from_json(j);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed design config: ") + e.what());
  } catch (const SchemaError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what());
  }
}

std::string dgp_config_to_json(const DgpConfig& config) {
  json j = cell_to_json({"", config});
  j.erase("label");
  return j.dump(2) + "\n";
}

BenchmarkConfig parse_benchmark_config(const std::string& json_text, std::vector<std::string>* invalid) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("benchmark config is not valid JSON: ") + e.what());
  }
  BenchmarkConfig cfg;
  try {
    if (!j.is_object()) throw SchemaError("benchmark config must be a JSON object");
    cfg.replications = j.value("replications", cfg.replications);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.time_quantiles = j.value("time_quantiles", cfg.time_quantiles);
    cfg.covariate_profiles = j.value("covariate_profiles", cfg.covariate_profiles);
    cfg.empirical_baseline = j.value("empirical_baseline", cfg.empirical_baseline);
    cfg.roc_grid = j.value("roc_grid", cfg.roc_grid);
    cfg.bernstein_order = j.value("bernstein_order", cfg.bernstein_order);
    cfg.threads = j.value("threads", cfg.threads);
    if (!j.contains("cells") || !j["cells"].is_array()) throw SchemaError("benchmark config needs a 'cells' array");
    const json& cells = j["cells"];
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::string label = cells[i].is_object() ? cells[i].value("label", "cell" + std::to_string(i)) : "";
      try {
        cfg.cells.push_back({label, cell_from_json(cells[i])});
      } catch (const std::exception& e) {
        const std::string msg = "cell " + std::to_string(i) + " (" + label + "): " + e.what();
        if (!invalid) throw SchemaError(msg);
        invalid->push_back(msg);
      }
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed benchmark config: ") + e.what());
  }
  if (cfg.replications == 0) throw SchemaError("replications must be positive");
  if (cfg.roc_grid < 2) throw SchemaError("roc_grid must be at least 2");
  if (cfg.bernstein_order < 1) throw SchemaError("bernstein_order must be at least 1");
  for (double q : cfg.time_quantiles)
    if (!(q > 0.0 && q < 1.0)) throw SchemaError("time quantiles must lie in (0, 1)");
  for (double x : cfg.covariate_profiles)
    if (!std::isfinite(x)) throw SchemaError("covariate profiles must be finite");
  return cfg;
}

std::string benchmark_config_to_json(const BenchmarkConfig& c) {
  json j{{"replications", c.replications},
         {"seed", c.seed},
         {"time_quantiles", c.time_quantiles},
         {"covariate_profiles", c.covariate_profiles},
         {"empirical_baseline", c.empirical_baseline},
         {"roc_grid", c.roc_grid},
         {"bernstein_order", c.bernstein_order},
         {"threads", c.threads}};
  j["cells"] = json::array();
  for (const auto& cell : c.cells) j["cells"].push_back(cell_to_json(cell));
  return j.dump(2) + "\n";
}

BenchmarkReport run_benchmark(const BenchmarkConfig& config) {
  BenchmarkReport report;
  report.config = config;
  std::vector<std::vector<Target>> targets;
  for (const auto& cell : config.cells) targets.push_back(targets_for(config, cell.dgp));

  const std::size_t tasks = config.cells.size() * config.replications;
  std::vector<TaskResult> results(tasks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < tasks; k = next++) {
      const std::size_t cell = k / config.replications;
      const std::size_t rep = k % config.replications;
      try {
        results[k] = run_task(config, cell, rep, targets[cell]);
      } catch (const std::exception& e) {
        results[k].failures.push_back({cell, rep, "data", e.what()});
      }
    }
  };
  std::size_t threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(tasks, 1));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& r : results) {
    report.roc.insert(report.roc.end(), r.roc.begin(), r.roc.end());
    report.parameters.insert(report.parameters.end(), r.parameters.begin(), r.parameters.end());
    report.failures.insert(report.failures.end(), r.failures.begin(), r.failures.end());
  }
  return report;
}

std::string summary_csv(const BenchmarkReport& report) {
  std::string out =
      "cell,label,n,rho,censor_rate,biomarker,time,covariates,estimator,metric,quantile,profile,truth,count,failures,"
      "mean,sd,bias,mc_se,median,q25,q75\n";
  const auto& cells = report.config.cells;
  std::map<std::pair<std::size_t, std::string>, std::size_t> failures;
  for (const auto& f : report.failures) ++failures[{f.cell, f.estimator}];

  // ROC metrics grouped by (cell, estimator, quantile, profile); map order is the output order
  using Key = std::tuple<std::size_t, std::string, double, double>;
  std::map<Key, std::vector<const RocRecord*>> groups;
  for (const auto& r : report.roc)
    groups[Key{r.cell, r.estimator, r.quantile, std::isnan(r.profile) ? -kInf : r.profile}].push_back(&r);
  for (const auto& [key, recs] : groups) {
    const auto& [cell, est, q, prof] = key;
    std::vector<double> aucs, rises;
    for (const auto* r : recs) {
      aucs.push_back(r->auc);
      rises.push_back(r->rise);
    }
    const double truth = recs.front()->true_auc;
    const std::string prefix = std::to_string(cell) + "," + cell_columns(cells[cell]) + "," + est + ",";
    const std::string where = fmt(q) + "," + (std::isinf(prof) ? "" : fmt(prof)) + ",";
    const std::string nfail = std::to_string(failures.count({cell, est}) ? failures.at({cell, est}) : 0);
    const Summary a = summarize(aucs);
    const double se = a.count > 1 ? a.sd / std::sqrt(static_cast<double>(a.count)) : kNaN;
    out += prefix + "auc," + where + fmt(truth) + "," + std::to_string(a.count) + "," + nfail + "," + fmt(a.mean) + "," +
           fmt(a.sd) + "," + fmt(a.mean - truth) + "," + fmt(se) + "," + fmt(a.median) + "," + fmt(a.q25) + "," +
           fmt(a.q75) + "\n";
    const Summary r = summarize(rises);
    const double rse = r.count > 1 ? r.sd / std::sqrt(static_cast<double>(r.count)) : kNaN;
    out += prefix + "rise," + where + "0," + std::to_string(r.count) + "," + nfail + "," + fmt(r.mean) + "," +
           fmt(r.sd) + ",," + fmt(rse) + "," + fmt(r.median) + "," + fmt(r.q25) + "," + fmt(r.q75) + "\n";
  }

  // parameters, in first-seen order within each cell
  std::map<std::size_t, std::vector<std::string>> order;
  std::map<std::pair<std::size_t, std::string>, std::vector<const ParameterRecord*>> pgroups;
  for (const auto& p : report.parameters) {
    auto& v = pgroups[{p.cell, p.name}];
    if (v.empty()) order[p.cell].push_back(p.name);
    v.push_back(&p);
  }
  for (const auto& [cell, names] : order) {
    const std::string nfail = std::to_string(failures.count({cell, "npb"}) ? failures.at({cell, "npb"}) : 0);
    for (const auto& name : names) {
      const auto& recs = pgroups[{cell, name}];
      std::vector<double> est, bias;
      bool known = true;
      for (const auto* p : recs) {
        est.push_back(p->estimate);
        known = known && !std::isnan(p->truth);
        bias.push_back(p->estimate - p->truth);
      }
      const Summary s = summarize(est);
      double mean_bias = kNaN, se = kNaN;
      if (known) {
        const Summary b = summarize(bias);
        mean_bias = b.mean;
        se = b.count > 1 ? b.sd / std::sqrt(static_cast<double>(b.count)) : kNaN;
      }
      // truth column: common value when all replications share it
      double truth = recs.front()->truth;
      for (const auto* p : recs)
        if (!(p->truth == truth)) truth = kNaN;
      out += std::to_string(cell) + "," + cell_columns(cells[cell]) + ",npb,param:" + csv_field(name) + ",,," +
             fmt(truth) + "," + std::to_string(s.count) + "," + nfail + "," + fmt(s.mean) + "," + fmt(s.sd) + "," +
             fmt(mean_bias) + "," + fmt(se) + "," + fmt(s.median) + "," + fmt(s.q25) + "," + fmt(s.q75) + "\n";
    }
  }
  return out;
}

std::string replications_csv(const BenchmarkReport& report) {
  std::string out = "cell,replication,estimator,quantile,profile,horizon,auc,true_auc,rise\n";
  for (const auto& r : report.roc)
    out += std::to_string(r.cell) + "," + std::to_string(r.replication) + "," + r.estimator + "," + fmt(r.quantile) +
           "," + fmt(r.profile) + "," + fmt(r.horizon) + "," + fmt(r.auc) + "," + fmt(r.true_auc) + "," + fmt(r.rise) +
           "\n";
  return out;
}

std::string parameters_csv(const BenchmarkReport& report) {
  std::string out = "cell,replication,parameter,estimate,truth\n";
  for (const auto& p : report.parameters)
    out += std::to_string(p.cell) + "," + std::to_string(p.replication) + "," + csv_field(p.name) + "," +
           fmt(p.estimate) + "," + fmt(p.truth) + "\n";
  return out;
}

std::string failures_csv(const BenchmarkReport& report) {
  std::string out = "cell,replication,estimator,message\n";
  for (const auto& f : report.failures)
    out += std::to_string(f.cell) + "," + std::to_string(f.replication) + "," + f.estimator + "," +
           csv_field(f.message) + "\n";
  return out;
}

std::vector<double> coefficient_vector(const NpbModel& m) {
  std::vector<double> v = m.margin_y().transform.coefficients();
  const auto& ct = m.margin_t().transform.coefficients();
  v.insert(v.end(), ct.begin(), ct.end());
  v.insert(v.end(), m.margin_y().beta.begin(), m.margin_y().beta.end());
  v.insert(v.end(), m.margin_t().beta.begin(), m.margin_t().beta.end());
  v.push_back(m.dependence().alpha);
  v.insert(v.end(), m.dependence().gamma.begin(), m.dependence().gamma.end());
  return v;
}

std::vector<std::string> coefficient_names(const NpbModel& m) {
  std::vector<std::string> n;
  for (std::size_t k = 0; k < m.margin_y().transform.coefficients().size(); ++k) n.push_back("y.theta" + std::to_string(k));
  for (std::size_t k = 0; k < m.margin_t().transform.coefficients().size(); ++k) n.push_back("t.theta" + std::to_string(k));
  for (const auto& c : m.margin_y().covariate_names) n.push_back("y.beta[" + c + "]");
  for (const auto& c : m.margin_t().covariate_names) n.push_back("t.beta[" + c + "]");
  n.push_back(m.dependence().form == Dependence::Form::constant ? "lambda" : "alpha");
  for (const auto& c : m.dependence().covariate_names) n.push_back("gamma[" + c + "]");
  return n;
}

std::vector<double> true_coefficients(const DgpConfig& dgp, const NpbModel& fitted) {
  std::vector<double> v;
  // h linear on the working scale has Bernstein coefficients l + (u - l) k / M
  auto linear = [&](const BernsteinBasis& b, bool exact) {
    for (std::size_t k = 0; k < b.size(); ++k)
      v.push_back(exact ? b.lower() + (b.upper() - b.lower()) * static_cast<double>(k) / b.order() : kNaN);
  };
  const BernsteinBasis& by = fitted.margin_y().transform.basis();
  const BernsteinBasis& bt = fitted.margin_t().transform.basis();
  const bool probit_y = fitted.margin_y().link.kind == LinkKind::probit;
  const bool probit_t = fitted.margin_t().link.kind == LinkKind::probit;
  linear(by, probit_y && dgp.biomarker == BiomarkerDist::normal && !by.log_scale());
  linear(bt, probit_t && dgp.time == TimeDist::lognormal && bt.log_scale());
  const double gy = dgp.covariates ? dgp.covariates->gamma_y : 0.0;
  const double gt = dgp.covariates ? dgp.covariates->gamma_t : 0.0;
  for (std::size_t k = 0; k < fitted.margin_y().beta.size(); ++k) v.push_back(probit_y ? gy : kNaN);
  for (std::size_t k = 0; k < fitted.margin_t().beta.size(); ++k) v.push_back(probit_t ? gt : kNaN);
  v.push_back(lambda_from_rho(dgp.rho));
  for (std::size_t k = 0; k < fitted.dependence().gamma.size(); ++k) v.push_back(0.0);
  return v;
}

}  // namespace npb
