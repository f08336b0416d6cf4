#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cpl/baselines.hpp"
#include "cpl/commands.hpp"
#include "cpl/config.hpp"
#include "cpl/errors.hpp"
#include "cpl/sdifp.hpp"
#include "cpl/trainer.hpp"
#include "cpl/verify.hpp"

namespace py = pybind11;
using namespace cpl;

namespace {

using Overrides = std::map<std::string, std::string>;

RunConfig make_config(const Overrides& overrides) {
  RunConfig c;
  for (const auto& [k, v] : overrides) set_config_value(c, k, v);
  return c;
}

py::dict record_dict(const MetricsRecord& r) {
  py::dict d;
  d["epoch"] = r.epoch;
  d["loss"] = r.loss;
  d["error_u"] = r.error_u;
  d["error_c1"] = r.error_c1;
  d["error_c2"] = r.error_c2;
  d["tape_nodes"] = r.tape_nodes;
  d["seconds"] = r.seconds;
  return d;
}

py::dict run_train(const Overrides& overrides) {
  const RunConfig config = make_config(overrides);
  std::ostringstream log;
  const PreparedProblem prepared = prepare_problem(config, log);
  TrainResult result;
  {
    py::gil_scoped_release release;
    result = train(prepared.problem, config.train, prepared.reference.get());
  }
  py::list history;
  for (const auto& r : result.history) history.append(record_dict(r));
  py::list table;
  for (const auto& a : result.table) table.append(py::make_tuple(a.t, a.alpha, a.beta));
  py::dict out;
  out["history"] = history;
  out["alpha_beta"] = table;
  out["params"] = result.params.values;
  out["max_tape_nodes"] = result.max_tape_nodes;
  return out;
}

py::array_t<double> sobol(std::size_t m, std::size_t d, std::uint64_t skip) {
  const PointCloud c = sobol_points(m, d, skip);
  py::array_t<double> a({m, d});
  std::copy(c.coords.begin(), c.coords.end(), a.mutable_data());
  return a;
}

}  // namespace

PYBIND11_MODULE(_cpl, m) {
  m.doc() = "Conservation-projected PINN training core";
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("problem_names", &problem_names);
  m.def("config_keys", [] {
    std::vector<std::string> names;
    for (const auto& k : config_keys()) names.push_back(k.name);
    return names;
  });
  m.def("render_config", [](const Overrides& o) { return render_config(make_config(o)); }, py::arg("overrides") = Overrides{});
  m.def("train", &run_train, py::arg("overrides"), "Train with `--key value` style overrides; returns history and table.");
  m.def("sobol", &sobol, py::arg("m"), py::arg("d"), py::arg("skip") = 0);
  m.def(
      "solve_affine",
      [](double mu1, double mu2, double c1_bar, double c2_bar) {
        MomentEstimate mom;
        mom.mu1 = mu1;
        mom.mu2 = mu2;
        const AffineParams a = solve_affine(mom, {c1_bar, c2_bar});
        return py::make_tuple(a.alpha, a.beta);
      },
      py::arg("mu1"), py::arg("mu2"), py::arg("c1_bar"), py::arg("c2_bar"));
  m.def("proj_linear", [](const std::vector<double>& u, double dv, double c1) { return proj_linear(u, dv, c1); },
        py::arg("u"), py::arg("dv"), py::arg("c1"));
  m.def("proj_quadratic", [](const std::vector<double>& u, double dv, double c2) { return proj_quadratic(u, dv, c2); },
        py::arg("u"), py::arg("dv"), py::arg("c2"));
  m.def(
      "proj_combined",
      [](const std::vector<double>& u, double dv, double c1, double c2) { return proj_combined(u, dv, c1, c2); },
      py::arg("u"), py::arg("dv"), py::arg("c1"), py::arg("c2"));
  m.def("verify", [](const std::string& fault) {
    VerifyOptions opt;
    opt.inject_fault = fault;
    py::list out;
    for (const auto& r : run_verify(opt)) {
      py::dict d;
      d["module"] = r.module;
      d["name"] = r.name;
      d["observed"] = r.observed;
      d["tolerance"] = r.tolerance;
      d["passed"] = r.passed;
      out.append(d);
    }
    return out;
  }, py::arg("inject_fault") = "");
}
