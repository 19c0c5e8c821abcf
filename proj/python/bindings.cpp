#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "itreg/errors.hpp"
#include "itreg/harness.hpp"

namespace py = pybind11;
using namespace itreg;

namespace {

RegularizerSpec make_spec(const std::string& kind, std::size_t dim, std::size_t group_size,
                          std::size_t rows) {
  switch (reg_kind_from_string(kind)) {
    case RegKind::L1: return RegularizerSpec::l1(dim);
    case RegKind::L12: return RegularizerSpec::l12_uniform(dim, group_size);
    case RegKind::TV1D: return RegularizerSpec::tv1d(dim);
    case RegKind::Nuclear:
      if (rows == 0 || dim % rows != 0) throw InputError("nuclear: rows must divide the dimension");
      return RegularizerSpec::nuclear(rows, dim / rows);
  }
  throw InputError("unknown regularizer");
}

ExperimentConfig parse_config(const std::string& text) {
  try {
    return ExperimentConfig::from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("config: ") + e.what());
  }
}

py::dict trace_dict(const Trace& tr) {
  std::vector<std::size_t> k;
  std::vector<double> err, residual, dual;
  for (const auto& r : tr.records) {
    k.push_back(r.k);
    err.push_back(r.err_to_truth);
    residual.push_back(r.residual);
    dual.push_back(r.dual_objective);
  }
  py::dict d;
  d["method"] = std::string(to_string(tr.method));
  d["k"] = k;
  d["err_to_truth"] = err;
  d["residual"] = residual;
  d["dual_objective"] = dual;
  return d;
}

py::dict consistency_dict(const ConsistencyReport& r) {
  py::dict d;
  d["k_best"] = r.k_best;
  d["d_best"] = r.d_best;
  d["interval"] = r.interval ? py::cast(*r.interval) : py::none();
  d["consistent_at_best"] = r.consistent_at_best;
  return d;
}

}  // namespace

PYBIND11_MODULE(_itreg, m) {
  m.doc() = "Iterative regularization by dual gradient descent";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);

  m.def("spectral_norm", [](const Matrix& a) { return spectral_norm(a); }, py::arg("a"));
  m.def(
      "prox",
      [](const std::string& kind, const Vector& x, double tau, std::size_t group_size,
         std::size_t rows) {
        return prox(make_spec(kind, static_cast<std::size_t>(x.size()), group_size, rows), tau, x);
      },
      py::arg("kind"), py::arg("x"), py::arg("tau"), py::arg("group_size") = 1,
      py::arg("rows") = 0);
  m.def(
      "value",
      [](const std::string& kind, const Vector& x, std::size_t group_size, std::size_t rows) {
        return value(make_spec(kind, static_cast<std::size_t>(x.size()), group_size, rows), x);
      },
      py::arg("kind"), py::arg("x"), py::arg("group_size") = 1, py::arg("rows") = 0);
  m.def(
      "stopping_schedule",
      [](double delta, double c, const std::string& method) {
        return stopping_schedule(delta, c, method_from_string(method));
      },
      py::arg("delta"), py::arg("c"), py::arg("method") = "dgd");
  m.def(
      "run",
      [](const std::string& config_json) {
        const ExperimentResult res = run_experiment(parse_config(config_json));
        py::list out;
        for (const auto& o : res.outcomes) {
          py::dict d = trace_dict(o.trace);
          d["consistency"] = consistency_dict(o.consistency);
          out.append(d);
        }
        py::dict r;
        r["problem_id"] = res.problem.id;
        r["delta"] = res.problem.noise_norm;
        r["truth_size"] = res.truth.size();
        r["outcomes"] = out;
        return r;
      },
      py::arg("config_json"), "Run every configured method; config as a JSON string.");
  m.def(
      "problem",
      [](const std::string& config_json) {
        const ProblemInstance p = experiment_problem(parse_config(config_json));
        py::dict d;
        d["id"] = p.id;
        d["x"] = p.x.matrix();
        d["w_true"] = p.w_true;
        d["y_clean"] = p.y_clean;
        d["y_noisy"] = p.y_noisy;
        d["noise_norm"] = p.noise_norm;
        return d;
      },
      py::arg("config_json"));
}
