#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "m2m/error.hpp"
#include "m2m/harvest.hpp"
#include "m2m/io.hpp"
#include "m2m/ipcta.hpp"
#include "m2m/noma_analytic.hpp"
#include "m2m/scenario.hpp"
#include "m2m/sweep.hpp"

namespace py = pybind11;
using namespace m2m;

namespace {

Scenario scenario_from(const std::string& text, std::optional<std::uint64_t> seed) {
  Scenario s = text.empty() ? Scenario{} : parse_scenario(text, "<python>");
  if (seed) s.seed = *seed;
  s.validate();
  return s;
}

std::string solve_json(const std::string& strategy, const std::string& config, std::optional<std::uint64_t> seed) {
  const Scenario s = scenario_from(config, seed);
  const auto topo = s.topology();
  const auto params = s.system();
  const auto r = solve(parse_strategy(strategy), topo, params);
  nlohmann::json out;
  out["allocation"] = to_json(r.allocation);
  out["report"] = to_json(r.report);
  out["verification"] = to_json(r.verification);
  out["iterations"] = r.trace.objective.size() - 1;
  out["termination"] = r.trace.termination;
  out["objective_trace"] = r.trace.objective;
  return out.dump();
}

std::string sweep_json(const std::string& param, const std::vector<double>& grid, int replications,
                       const std::string& config, int workers) {
  SweepSpec spec;
  spec.param = parse_sweep_param(param);
  spec.grid = grid;
  spec.replications = replications;
  spec.base = scenario_from(config, std::nullopt);
  SweepOptions opts;
  opts.workers = workers;
  const auto rows = run_sweep(spec, opts);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows)
    out.push_back({{"param_value", r.param_value},
                   {"replication", r.replication},
                   {"strategy", to_string(r.strategy)},
                   {"energy_j", r.feasible ? nlohmann::json(r.energy_j) : nlohmann::json(nullptr)},
                   {"iterations", r.iterations},
                   {"feasible", r.feasible},
                   {"wallclock_s", r.wallclock_s},
                   {"error", r.error}});
  return out.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Energy-minimal NOMA/TDMA resource allocation for M2M uplinks";

  py::register_exception<Error>(m, "M2MError", PyExc_RuntimeError);

  m.def("eh_harvest", [](double received_w) { return eh_harvest(received_w, EhModel{}); },
        py::arg("received_w"), "Harvested power (W) of the default logistic harvester.");
  m.def(
      "closed_form_powers",
      [](std::vector<double> gains, const std::vector<double>& bits, double t, double bandwidth_hz,
         double noise_w) {
        return closed_form_powers(GroupTimeProfile::from_parts(std::move(gains), bits, bandwidth_hz), t, noise_w);
      },
      py::arg("gains"), py::arg("bits"), py::arg("t"), py::arg("bandwidth_hz") = 18e3,
      py::arg("noise_w") = dbm_to_watts(-104.0), "Minimal SIC powers of one group in decoding order.");
  m.def(
      "optimal_device_time",
      [](std::vector<double> gains, const std::vector<double>& bits, std::size_t pos, double circuit_w) {
        auto params = SystemParams::uniform(gains.size(), 1, 1e4, 5e-3, 1.0);
        params.circuit_device_w = circuit_w;
        const auto g = GroupTimeProfile::from_parts(std::move(gains), bits, params.bandwidth_hz);
        return optimal_device_time(g, pos, params);
      },
      py::arg("gains"), py::arg("bits"), py::arg("pos"), py::arg("circuit_w"));
  m.def("default_scenario", [] { return dump_scenario(Scenario{}); });
  m.def("_solve_json", &solve_json, py::arg("strategy"), py::arg("config") = "", py::arg("seed") = py::none(),
        py::call_guard<py::gil_scoped_release>());
  m.def("_sweep_json", &sweep_json, py::arg("param"), py::arg("grid"), py::arg("replications"),
        py::arg("config") = "", py::arg("workers") = 0, py::call_guard<py::gil_scoped_release>());
}
