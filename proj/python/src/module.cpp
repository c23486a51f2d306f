#include <pybind11/pybind11.h>
#include <pybind11/numpy.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "npb/benchmark.hpp"
#include "npb/bvn.hpp"
#include "npb/diagnostics.hpp"
#include "npb/errors.hpp"
#include "npb/io.hpp"
#include "npb/joint.hpp"
#include "npb/roc.hpp"
#include "npb/sim.hpp"
#include "npb/version.hpp"

namespace py = pybind11;
using namespace npb;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// bounds: (n, 4) columns y_lower, y_upper, t_lower, t_upper; x: (n, p) or None
std::vector<Observation> to_observations(const Array& bounds, std::optional<Array> x) {
  if (bounds.ndim() != 2 || bounds.shape(1) != 4) throw SchemaError("bounds must have shape (n, 4)");
  const auto n = bounds.shape(0);
  std::size_t p = 0;
  if (x) {
    if (x->ndim() != 2 || x->shape(0) != n) throw SchemaError("x must have shape (n, p)");
    p = static_cast<std::size_t>(x->shape(1));
  }
  auto b = bounds.unchecked<2>();
  std::vector<Observation> out(static_cast<std::size_t>(n));
  for (py::ssize_t i = 0; i < n; ++i) {
    auto& o = out[static_cast<std::size_t>(i)];
    o.y_lower = b(i, 0);
    o.y_upper = b(i, 1);
    o.t_lower = b(i, 2);
    o.t_upper = b(i, 3);
    if (x) {
      auto xv = x->unchecked<2>();
      for (std::size_t j = 0; j < p; ++j) o.x.push_back(xv(i, static_cast<py::ssize_t>(j)));
    }
  }
  validate_observations(out, p);
  return out;
}

py::dict data_dict(const std::vector<Observation>& obs, const std::vector<std::string>& names) {
  const auto n = static_cast<py::ssize_t>(obs.size());
  const auto p = static_cast<py::ssize_t>(names.size());
  Array bounds({n, py::ssize_t{4}});
  Array x({n, p});
  auto b = bounds.mutable_unchecked<2>();
  auto xv = x.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < n; ++i) {
    const auto& o = obs[static_cast<std::size_t>(i)];
    b(i, 0) = o.y_lower;
    b(i, 1) = o.y_upper;
    b(i, 2) = o.t_lower;
    b(i, 3) = o.t_upper;
    for (py::ssize_t j = 0; j < p; ++j) xv(i, j) = o.x[static_cast<std::size_t>(j)];
  }
  py::dict d;
  d["bounds"] = bounds;
  d["x"] = x;
  d["covariate_names"] = names;
  return d;
}

py::dict curve_dict(const RocCurve& c) {
  py::dict d;
  d["horizon"] = c.horizon;
  d["thresholds"] = c.thresholds;
  d["fpr"] = c.fpr;
  d["tpr"] = c.tpr;
  d["auc"] = c.auc;
  return d;
}

py::dict interval_dict(const Interval& iv) {
  py::dict d;
  d["estimate"] = iv.estimate;
  d["lower"] = iv.lower;
  d["upper"] = iv.upper;
  return d;
}

struct Model {
  FitResult fit;
  std::size_t n = 0;
};

Model model_from(const StoredModel& s) { return {fit_from_stored(s), s.n}; }
StoredModel stored(const Model& m) { return stored_from_fit(m.fit, m.n); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Nonparanormal prognostic biomarker models (C++ core)";
  m.attr("__version__") = std::string(kVersion);

  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);

  m.def("bvn_cdf", &bvn_cdf, py::arg("z1"), py::arg("z2"), py::arg("rho"));
  m.def("rectangle_probability", &rectangle_probability, py::arg("a1"), py::arg("b1"), py::arg("a2"), py::arg("b2"),
        py::arg("rho"));

  py::class_<Model>(m, "Model")
      .def_static("from_json", [](const std::string& text) { return model_from(model_from_json(text)); })
      .def_static("load", [](const std::string& path) { return model_from(load_model(path)); })
      .def("to_json", [](const Model& self) { return model_to_json(stored(self)); })
      .def("save", [](const Model& self, const std::string& path) { save_model(stored(self), path); })
      .def_property_readonly("covariate_names", [](const Model& self) { return self.fit.model.covariate_names(); })
      .def_property_readonly("parameter_names", [](const Model& self) { return self.fit.parameter_names; })
      .def_property_readonly("parameters", [](const Model& self) { return self.fit.model.parameters(); })
      .def_property_readonly("loglik", [](const Model& self) { return self.fit.loglik; })
      .def_property_readonly("has_covariance", [](const Model& self) { return self.fit.has_covariance(); })
      .def_property_readonly("covariance",
                             [](const Model& self) -> py::object {
                               if (!self.fit.has_covariance()) return py::none();
                               const auto& c = self.fit.covariance;
                               Array out({c.rows(), c.cols()});
                               auto o = out.mutable_unchecked<2>();
                               for (py::ssize_t i = 0; i < c.rows(); ++i)
                                 for (py::ssize_t j = 0; j < c.cols(); ++j) o(i, j) = c(i, j);
                               return out;
                             })
      .def("rho", [](const Model& self, std::vector<double> x) { return self.fit.model.rho(x); },
           py::arg("x") = std::vector<double>{})
      .def("cdf_y", [](const Model& self, double y, std::vector<double> x) { return self.fit.model.cdf_y(y, x); },
           py::arg("y"), py::arg("x") = std::vector<double>{})
      .def("cdf_t", [](const Model& self, double t, std::vector<double> x) { return self.fit.model.cdf_t(t, x); },
           py::arg("t"), py::arg("x") = std::vector<double>{})
      .def("quantile_t",
           [](const Model& self, double p, std::vector<double> x) { return self.fit.model.quantile_t(p, x); },
           py::arg("p"), py::arg("x") = std::vector<double>{})
      .def("rho_interval",
           [](const Model& self, std::vector<double> x, double level) {
             return interval_dict(rho_interval(self.fit, x, level));
           },
           py::arg("x") = std::vector<double>{}, py::arg("level") = 0.95)
      .def("loglik_of", [](const Model& self, const Array& bounds, std::optional<Array> x) {
             return loglik(self.fit.model, to_observations(bounds, x));
           },
           py::arg("bounds"), py::arg("x") = py::none());

  m.def(
      "fit",
      [](const Array& bounds, std::optional<Array> x, const std::string& config_json) {
        const FitConfig cfg = parse_fit_config(config_json);
        auto data = to_observations(bounds, x);
        std::size_t n = data.size();
        FitResult f = [&] {
          py::gil_scoped_release release;
          return fit(data, cfg);
        }();
        return Model{std::move(f), n};
      },
      py::arg("bounds"), py::arg("x") = py::none(), py::arg("config") = "{}",
      "Fit a model; `config` is the JSON fit configuration used by the command-line tool.");

  m.def("read_csv", [](const std::string& path) {
    const ObservationTable t = read_observations_csv(path);
    return data_dict(t.rows, t.covariate_names);
  });

  m.def("roc_curve",
        [](const Model& model, double t, std::vector<double> x, std::size_t grid) {
          return curve_dict(roc_curve(model.fit.model, t, x, grid));
        },
        py::arg("model"), py::arg("t"), py::arg("x") = std::vector<double>{}, py::arg("grid") = kDefaultRocGrid);
  m.def("auc", [](const Model& model, double t, std::vector<double> x, std::size_t grid) {
          return auc(model.fit.model, t, x, grid);
        },
        py::arg("model"), py::arg("t"), py::arg("x") = std::vector<double>{}, py::arg("grid") = kDefaultRocGrid);
  m.def("youden",
        [](const Model& model, double t, std::vector<double> x, std::size_t grid) {
          const YoudenResult y = youden(model.fit.model, t, x, grid);
          py::dict d;
          d["index"] = y.index;
          d["threshold"] = y.threshold;
          d["sensitivity"] = y.sensitivity;
          d["specificity"] = y.specificity;
          d["flat"] = y.flat;
          return d;
        },
        py::arg("model"), py::arg("t"), py::arg("x") = std::vector<double>{}, py::arg("grid") = kDefaultRocGrid);

  m.def("generate_dataset",
        [](const std::string& config_json, std::uint64_t seed, std::uint64_t cell, std::uint64_t replication) {
          DgpConfig d = parse_dgp_config(config_json);
          d.seed = seed;
          const SimulatedData s = generate_dataset(d, cell, replication);
          py::dict out = data_dict(s.observations, s.covariate_names);
          out["event_time"] = s.event_time;
          out["censoring_time"] = s.censoring_time;
          return out;
        },
        py::arg("config"), py::arg("seed") = 1, py::arg("cell") = 0, py::arg("replication") = 0);
  m.def("true_roc",
        [](const std::string& config_json, double t, std::optional<double> x, std::size_t grid) {
          return curve_dict(true_roc(parse_dgp_config(config_json), t, x, grid));
        },
        py::arg("config"), py::arg("t"), py::arg("x") = py::none(), py::arg("grid") = kDefaultRocGrid);

  m.def("pit",
        [](const Model& model, const Array& bounds, std::optional<Array> x, std::uint64_t seed, bool km) {
          const auto data = to_observations(bounds, x);
          py::dict d;
          d["u1"] = km ? pit_event_time(kaplan_meier(data), data, seed) : pit_event_time(model.fit.model, data, seed);
          d["u2"] = pit_biomarker_conditional(model.fit.model, data, seed);
          return d;
        },
        py::arg("model"), py::arg("bounds"), py::arg("x") = py::none(), py::arg("seed") = 1, py::arg("km") = false);
  m.def("ks_uniform", [](std::vector<double> u) {
    const QqResult q = qq_uniform(u);
    return py::make_tuple(q.ks_statistic, q.ks_p_value);
  });

  m.def("run_benchmark", [](const std::string& config_json) {
    const BenchmarkConfig cfg = parse_benchmark_config(config_json);
    BenchmarkReport r;
    {
      py::gil_scoped_release release;
      r = run_benchmark(cfg);
    }
    py::dict d;
    d["summary"] = summary_csv(r);
    d["replications"] = replications_csv(r);
    d["parameters"] = parameters_csv(r);
    d["failures"] = failures_csv(r);
    return d;
  });
}
