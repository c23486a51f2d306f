#include "npb/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "npb/errors.hpp"
#include "npb/normal.hpp"

namespace npb {

using nlohmann::json;

StoredModel stored_from_fit(const FitResult& fit, std::size_t n) {
  return StoredModel{fit.model, fit.covariance, fit.loglik, n};
}

FitResult fit_from_stored(const StoredModel& stored) {
  FitResult r{stored.model, stored.loglik.value_or(0.0), 0.0, stored.covariance, stored.model.parameter_names(), {}};
  return r;
}

namespace {

json margin_json(const MarginalModel& m) {
  const BernsteinBasis& b = m.transform.basis();
  return json{{"link", to_string(m.link.kind)},
              {"bernstein",
               {{"order", b.order()},
                {"lower", b.lower()},
                {"upper", b.upper()},
                {"log_scale", b.log_scale()},
                {"coefficients", m.transform.coefficients()}}},
              {"covariates", m.covariate_names},
              {"beta", m.beta}};
}

MarginalModel margin_from_json(const json& j) {
  const json& b = j.at("bernstein");
  BernsteinBasis basis(b.at("order").get<int>(), b.at("lower").get<double>(), b.at("upper").get<double>(),
                       b.at("log_scale").get<bool>());
  return MarginalModel{LinkFunction{parse_link(j.at("link").get<std::string>())},
                       MonotoneTransform(basis, b.at("coefficients").get<std::vector<double>>()),
                       j.at("beta").get<std::vector<double>>(), j.at("covariates").get<std::vector<std::string>>()};
}

// "1.0" -> (1, 0)
std::pair<int, int> parse_version(const std::string& v) {
  const auto dot = v.find('.');
  try {
    std::size_t used = 0;
    const int major = std::stoi(v.substr(0, dot), &used);
    if (used != (dot == std::string::npos ? v.size() : dot)) throw std::invalid_argument(v);
    const int minor = dot == std::string::npos ? 0 : std::stoi(v.substr(dot + 1));
    return {major, minor};
  } catch (const std::exception&) {
    throw SchemaError("malformed format version '" + v + "'");
  }
}

}  // namespace

std::string model_to_json(const StoredModel& stored) {
  const NpbModel& m = stored.model;
  const Dependence& d = m.dependence();
  json j;
  j["format"] = kModelFormat;
  j["version"] = std::to_string(kModelFormatMajor) + "." + std::to_string(kModelFormatMinor);
  j["covariates"] = m.covariate_names();
  j["margins"] = {{"y", margin_json(m.margin_y())}, {"t", margin_json(m.margin_t())}};
  j["dependence"] = {{"form", d.form == Dependence::Form::constant ? "constant" : "covariate"},
                     {"alpha", d.alpha},
                     {"covariates", d.covariate_names},
                     {"gamma", d.gamma}};
  j["parameter_names"] = m.parameter_names();
  if (stored.has_covariance()) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < stored.covariance.rows(); ++r) {
      std::vector<double> row(stored.covariance.cols());
      for (Eigen::Index c = 0; c < stored.covariance.cols(); ++c) row[c] = stored.covariance(r, c);
      rows.push_back(row);
    }
    j["covariance"] = rows;
  } else {
    j["covariance"] = nullptr;
  }
  j["loglik"] = stored.loglik ? json(*stored.loglik) : json(nullptr);
  j["n"] = stored.n;
  return j.dump(2) + "\n";
}

StoredModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (!j.is_object() || j.value("format", "") != kModelFormat) throw SchemaError("not an npb-model document");
    const auto [major, minor] = parse_version(j.at("version").get<std::string>());
    (void)minor;
    if (major != kModelFormatMajor)
      throw SchemaError("unsupported npb-model major version " + std::to_string(major) + " (reader supports " +
                        std::to_string(kModelFormatMajor) + ")");
    const json& dj = j.at("dependence");
    Dependence dep;
    const std::string form = dj.at("form").get<std::string>();
    if (form == "constant")
      dep.form = Dependence::Form::constant;
    else if (form == "covariate")
      dep.form = Dependence::Form::covariate;
    else
      throw SchemaError("unknown dependence form '" + form + "'");
    dep.alpha = dj.at("alpha").get<double>();
    dep.gamma = dj.at("gamma").get<std::vector<double>>();
    dep.covariate_names = dj.at("covariates").get<std::vector<std::string>>();
    NpbModel model(margin_from_json(j.at("margins").at("y")), margin_from_json(j.at("margins").at("t")), dep,
                   j.at("covariates").get<std::vector<std::string>>());
    StoredModel s{model, {}, std::nullopt, j.value("n", std::size_t{0})};
    if (j.contains("loglik") && !j["loglik"].is_null()) s.loglik = j["loglik"].get<double>();
    if (j.contains("covariance") && !j["covariance"].is_null()) {
      const auto rows = j["covariance"].get<std::vector<std::vector<double>>>();
      const auto p = static_cast<Eigen::Index>(model.parameter_count());
      if (static_cast<Eigen::Index>(rows.size()) != p) throw SchemaError("covariance has the wrong dimension");
      s.covariance.resize(p, p);
      for (Eigen::Index r = 0; r < p; ++r) {
        if (static_cast<Eigen::Index>(rows[r].size()) != p) throw SchemaError("covariance has the wrong dimension");
        for (Eigen::Index c = 0; c < p; ++c) s.covariance(r, c) = rows[r][c];
      }
    }
    return s;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed model file: ") + e.what());
  } catch (const SchemaError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("invalid model: ") + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

void save_model(const StoredModel& stored, const std::string& path) { write_text_file(path, model_to_json(stored)); }

StoredModel load_model(const std::string& path) { return model_from_json(read_text_file(path)); }

std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  std::string s = text;
  if (!s.empty() && s.front() == '+') s.erase(0, 1);
  std::string lower = s;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "inf" || lower == "infinity") return kInf;
  if (lower == "-inf" || lower == "-infinity") return -kInf;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument("'" + text + "' is not a number");
  return v;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  std::string t = s.substr(a, b - a);
  if (t.size() >= 2 && t.front() == '"' && t.back() == '"') t = t.substr(1, t.size() - 2);
  return t;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

ObservationTable parse_observations_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("CSV is empty (a header row is required)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].empty()) throw SchemaError("CSV header: column " + std::to_string(c + 1) + " has no name");
    if (!col.emplace(header[c], c).second) throw SchemaError("CSV header: duplicate column '" + header[c] + "'");
  }
  auto has = [&](const char* n) { return col.count(n) > 0; };

  const bool y_interval = has("y_lower") || has("y_upper");
  const bool t_interval = has("t_lower") || has("t_upper");
  if (y_interval && !(has("y_lower") && has("y_upper")))
    throw SchemaError("CSV header: y_lower and y_upper must appear together");
  if (t_interval && !(has("t_lower") && has("t_upper")))
    throw SchemaError("CSV header: t_lower and t_upper must appear together");
  if (!y_interval && !has("y")) throw SchemaError("CSV header: need y or y_lower,y_upper");
  if (!t_interval && !(has("t") && has("status"))) throw SchemaError("CSV header: need t,status or t_lower,t_upper");
  if (y_interval && has("y")) throw SchemaError("CSV header: give either y or y_lower,y_upper, not both");
  if (t_interval && (has("t") || has("status")))
    throw SchemaError("CSV header: give either t,status or t_lower,t_upper, not both");

  static const char* reserved[] = {"y", "y_lower", "y_upper", "t", "status", "t_lower", "t_upper"};
  ObservationTable table;
  std::vector<std::size_t> covariate_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (std::find(std::begin(reserved), std::end(reserved), header[c]) != std::end(reserved)) continue;
    table.covariate_names.push_back(header[c]);
    covariate_cols.push_back(c);
  }

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_line(line);
    const std::string where = "CSV row " + std::to_string(row);
    if (cells.size() != header.size())
      throw SchemaError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                        std::to_string(cells.size()));
    auto num = [&](std::size_t c) {
      if (cells[c].empty()) throw SchemaError(where + ", column '" + header[c] + "': missing value");
      try {
        return parse_double(cells[c]);
      } catch (const std::invalid_argument&) {
        throw SchemaError(where + ", column '" + header[c] + "': '" + cells[c] + "' is not a number");
      }
    };
    Observation o;
    if (y_interval) {
      o.y_lower = num(col["y_lower"]);
      o.y_upper = num(col["y_upper"]);
    } else {
      o.y_lower = o.y_upper = num(col["y"]);
    }
    if (t_interval) {
      o.t_lower = num(col["t_lower"]);
      o.t_upper = num(col["t_upper"]);
    } else {
      const double t = num(col["t"]);
      const double status = num(col["status"]);
      if (status != 0.0 && status != 1.0)
        throw SchemaError(where + ", column 'status': must be 1 (event) or 0 (right-censored)");
      o.t_lower = t;
      o.t_upper = status == 1.0 ? t : kInf;
    }
    for (std::size_t c : covariate_cols) {
      const double v = num(c);
      if (!std::isfinite(v)) throw SchemaError(where + ", column '" + header[c] + "': covariate must be finite");
      o.x.push_back(v);
    }
    try {
      validate_observations(std::span<const Observation>(&o, 1), o.x.size());
    } catch (const std::invalid_argument& e) {
      std::string msg = e.what();
      const auto colon = msg.find(": ");
      throw SchemaError(where + ": " + (colon == std::string::npos ? msg : msg.substr(colon + 2)));
    }
    table.rows.push_back(std::move(o));
  }
  if (table.rows.empty()) throw SchemaError("CSV has no data rows");
  return table;
}

NumericTable parse_numeric_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("CSV is empty (a header row is required)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  NumericTable t;
  t.columns = split_line(line);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_line(line);
    const std::string where = "CSV row " + std::to_string(row);
    if (cells.size() != t.columns.size())
      throw SchemaError(where + ": expected " + std::to_string(t.columns.size()) + " fields, found " +
                        std::to_string(cells.size()));
    std::vector<double> r;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (cells[c].empty()) throw SchemaError(where + ", column '" + t.columns[c] + "': missing value");
      try {
        r.push_back(parse_double(cells[c]));
      } catch (const std::invalid_argument&) {
        throw SchemaError(where + ", column '" + t.columns[c] + "': '" + cells[c] + "' is not a number");
      }
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

std::vector<std::vector<double>> covariate_rows(const NumericTable& table, const std::vector<std::string>& names) {
  std::vector<std::size_t> idx;
  for (const auto& n : names) {
    const auto it = std::find(table.columns.begin(), table.columns.end(), n);
    if (it == table.columns.end()) throw SchemaError("table has no column for model covariate '" + n + "'");
    idx.push_back(static_cast<std::size_t>(it - table.columns.begin()));
  }
  std::vector<std::vector<double>> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    std::vector<double> x;
    for (std::size_t k : idx) {
      const double v = table.rows[r][k];
      if (!std::isfinite(v))
        throw SchemaError("CSV row " + std::to_string(r + 1) + ", column '" + table.columns[k] + "': covariate must be finite");
      x.push_back(v);
    }
    out.push_back(std::move(x));
  }
  return out;
}

ObservationTable read_observations_csv(const std::string& path) { return parse_observations_csv(read_text_file(path)); }

std::vector<Observation> select_covariates(const ObservationTable& table, const std::vector<std::string>& names) {
  std::vector<std::size_t> idx;
  for (const auto& n : names) {
    const auto it = std::find(table.covariate_names.begin(), table.covariate_names.end(), n);
    if (it == table.covariate_names.end()) throw SchemaError("data has no column for model covariate '" + n + "'");
    idx.push_back(static_cast<std::size_t>(it - table.covariate_names.begin()));
  }
  std::vector<Observation> out = table.rows;
  for (auto& o : out) {
    std::vector<double> x;
    for (std::size_t k : idx) x.push_back(o.x[k]);
    o.x = std::move(x);
  }
  return out;
}

FitConfig parse_fit_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("fit config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("fit config must be a JSON object");
  static const char* keys[] = {"margins", "covariates_y", "covariates_t", "dependence", "optim", "covariance"};
  for (const auto& [k, v] : j.items())
    if (std::find(std::begin(keys), std::end(keys), k) == std::end(keys)) throw SchemaError("fit config: unknown key '" + k + "'");
  FitConfig cfg;
  try {
    auto margin = [](const json& m, MarginalConfig& out, const std::string& name) {
      if (!m.is_object()) throw SchemaError("fit config: margin '" + name + "' must be an object");
      out.order = m.value("order", out.order);
      if (m.contains("link")) {
        try {
          out.link = parse_link(m["link"].get<std::string>());
        } catch (const std::invalid_argument& e) {
          throw SchemaError("fit config: margin '" + name + "': " + e.what());
        }
      }
      if (m.contains("log_scale") && !m["log_scale"].is_null()) out.log_scale = m["log_scale"].get<bool>();
      if (m.contains("lower") && !m["lower"].is_null()) out.lower = m["lower"].get<double>();
      if (m.contains("upper") && !m["upper"].is_null()) out.upper = m["upper"].get<double>();
    };
    if (j.contains("margins")) {
      for (const auto& [k, v] : j["margins"].items()) {
        if (k == "y")
          margin(v, cfg.margin_y, k);
        else if (k == "t")
          margin(v, cfg.margin_t, k);
        else
          throw SchemaError("fit config: unknown margin '" + k + "' (y, t)");
      }
    }
    cfg.covariates_y = j.value("covariates_y", std::vector<std::string>{});
    cfg.covariates_t = j.value("covariates_t", std::vector<std::string>{});
    if (j.contains("dependence")) {
      const json& d = j["dependence"];
      const std::string form = d.value("form", "constant");
      if (form == "constant")
        cfg.dependence = Dependence::Form::constant;
      else if (form == "covariate")
        cfg.dependence = Dependence::Form::covariate;
      else
        throw SchemaError("fit config: unknown dependence form '" + form + "'");
      cfg.covariates_dependence = d.value("covariates", std::vector<std::string>{});
      if (form == "constant" && !cfg.covariates_dependence.empty())
        throw SchemaError("fit config: constant dependence takes no covariates");
    }
    if (j.contains("optim")) {
      const json& o = j["optim"];
      cfg.optim.max_iterations = o.value("max_iterations", cfg.optim.max_iterations);
      cfg.optim.gradient_tolerance = o.value("gradient_tolerance", cfg.optim.gradient_tolerance);
      cfg.optim.relative_tolerance = o.value("relative_tolerance", cfg.optim.relative_tolerance);
    }
    cfg.compute_covariance = j.value("covariance", true);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed fit config: ") + e.what());
  }
  for (const auto* list : {&cfg.covariates_y, &cfg.covariates_t, &cfg.covariates_dependence})
    for (const auto& name : *list)
      if (std::find(cfg.covariate_names.begin(), cfg.covariate_names.end(), name) == cfg.covariate_names.end())
        cfg.covariate_names.push_back(name);
  return cfg;
}

std::string observations_to_csv(const std::vector<Observation>& rows, const std::vector<std::string>& covariate_names) {
  std::string s = "y_lower,y_upper,t_lower,t_upper";
  for (const auto& n : covariate_names) s += "," + n;
  s += "\n";
  for (const auto& o : rows) {
    s += format_double(o.y_lower) + "," + format_double(o.y_upper) + "," + format_double(o.t_lower) + "," +
         format_double(o.t_upper);
    for (double v : o.x) s += "," + format_double(v);
    s += "\n";
  }
  return s;
}

}  // namespace npb
