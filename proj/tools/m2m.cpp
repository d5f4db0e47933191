#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "m2m/error.hpp"
#include "m2m/io.hpp"
#include "m2m/ipcta.hpp"
#include "m2m/noma_analytic.hpp"
#include "m2m/scenario.hpp"
#include "m2m/sweep.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string strategy = "both";
};

m2m::Scenario load(const Common& c) {
  m2m::Scenario s = c.config.empty() ? m2m::Scenario{} : m2m::load_scenario(c.config);
  if (c.seed) s.seed = *c.seed;
  s.validate();
  return s;
}

std::vector<m2m::Strategy> strategies(const std::string& flag) {
  if (flag == "both") return {m2m::Strategy::Noma, m2m::Strategy::Tdma};
  return {m2m::parse_strategy(flag)};
}

void write(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) m2m::fail(m2m::ErrorKind::Config, "cannot write '" + path.string() + "'");
  out << text;
}

std::vector<double> parse_grid(const std::string& text, m2m::Dimension dim) {
  std::vector<double> grid;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) grid.push_back(m2m::parse_quantity(item, dim, "grid"));
  return grid;
}

// The constraint family with the largest residual.
std::string worst_family(const m2m::ViolationReport& r) {
  std::string name;
  double worst = -1e300;
  for (const auto& [n, v] : r.families)
    if (v > worst) {
      worst = v;
      name = n;
    }
  return name;
}

int cmd_gen_topology(const Common& c) {
  const auto s = load(c);
  const auto topo = s.topology();
  write(fs::path(c.out) / "topology.json", m2m::to_json(topo).dump(2) + "\n");
  std::printf("topology: %zu devices, %zu gateways, %zu clusters -> %s\n", topo.n_devices,
              topo.n_gateways, topo.n_clusters(), (fs::path(c.out) / "topology.json").c_str());
  return 0;
}

int cmd_solve(const Common& c) {
  const auto s = load(c);
  const auto topo = s.topology();
  const auto params = s.system();
  int status = 0;
  for (auto st : strategies(c.strategy)) {
    const std::string name(m2m::to_string(st));
    const fs::path dir = fs::path(c.out) / name;
    try {
      m2m::SolverConfig cfg;
      cfg.seed = s.seed;
      const auto r = m2m::solve(st, topo, params, cfg);
      write(dir / "allocation.json", m2m::to_json(r.allocation).dump(2) + "\n");
      json report = m2m::to_json(r.report);
      report["verification"] = m2m::to_json(r.verification);
      write(dir / "energy_report.json", report.dump(2) + "\n");
      write(dir / "trace.jsonl", m2m::trace_jsonl(r.trace));
      std::printf("%s: E_Tot = %.9g J, %zu iterations (%s), %s\n", name.c_str(), r.report.total_j,
                  r.trace.objective.size() - 1, r.trace.termination.c_str(),
                  r.verification.feasible ? "verified" : "NOT feasible");
      if (!r.verification.feasible) {
        std::fprintf(stderr, "%s: worst residual %.3g in %s\n", name.c_str(), r.verification.worst,
                     worst_family(r.verification).c_str());
        status = 2;
      }
    } catch (const m2m::Error& e) {
      std::fprintf(stderr, "%s: %s error: %s\n", name.c_str(), std::string(m2m::to_string(e.kind())).c_str(),
                   e.what());
      status = 2;
    }
  }
  return status;
}

int cmd_analyze(const Common& c, const std::vector<double>& curve_pc, int curve_points) {
  const auto s = load(c);
  const auto topo = s.topology();
  const auto params = s.system();
  const auto bound = m2m::t_upp(topo, params);
  json j = m2m::to_json(bound, topo);
  j["sum_group_times_s"] = 0.0;
  double sum = 0.0;
  for (double t : bound.group_times) sum += t;
  j["sum_group_times_s"] = sum;
  write(fs::path(c.out) / "analysis.json", j.dump(2) + "\n");
  write(fs::path(c.out) / "e11_curve.csv", m2m::curve_csv(m2m::device_energy_curve(s, curve_pc, curve_points)));
  std::printf("alpha = %zu, T_Upp = %.6g s, max_i min_j T_ij* = %.6g s\n", bound.alpha, bound.t_upp,
              m2m::max_min_device_time(bound, topo));
  return 0;
}

int cmd_verify(const Common& c, const std::string& allocation_path, double tol) {
  const auto s = load(c);
  std::ifstream in(allocation_path);
  if (!in) m2m::fail(m2m::ErrorKind::Config, "cannot open '" + allocation_path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    m2m::fail(m2m::ErrorKind::Parse, allocation_path + ": " + e.what());
  }
  const auto alloc = m2m::allocation_from_json(j);
  const auto topo = s.topology();
  const auto params = s.system();
  const auto v = m2m::verify_solution(topo, params, alloc, tol);
  json out = m2m::to_json(v);
  out["total_j"] = m2m::total_energy(topo, params, alloc).total_j;
  std::printf("%s\n", out.dump(2).c_str());
  return v.feasible ? 0 : 2;
}

int cmd_sweep(const Common& c, const std::string& param, const std::string& grid, int reps, int workers,
              double timeout, bool no_wallclock) {
  m2m::SweepSpec spec;
  spec.base = load(c);
  spec.param = m2m::parse_sweep_param(param);
  spec.grid = parse_grid(grid, m2m::dimension(spec.param));
  spec.replications = reps;
  spec.strategies = strategies(c.strategy);
  m2m::SweepOptions opts;
  opts.workers = workers;
  opts.timeout_s = timeout;
  opts.record_wallclock = !no_wallclock;
  const auto rows = m2m::run_sweep(spec, opts);
  const fs::path dir(c.out);
  write(dir / "rows.csv", m2m::rows_csv(rows));
  write(dir / "aggregate.csv", m2m::aggregate_csv(m2m::aggregate(rows)));
  write(dir / "summary.json", m2m::sweep_summary(spec, rows) + "\n");
  int failed = 0;
  for (const auto& r : rows) failed += r.feasible ? 0 : 1;
  std::printf("%zu rows (%d failed) -> %s\n", rows.size(), failed, dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-minimal NOMA/TDMA resource allocation for M2M uplinks with energy harvesting"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App* sub, bool with_strategy) {
    sub->add_option("--config", c.config, "scenario JSON (defaults when omitted)");
    sub->add_option("--seed", c.seed, "topology seed (overrides the config)");
    sub->add_option("--out", c.out, "output directory");
    if (with_strategy)
      sub->add_option("--strategy", c.strategy, "noma, tdma or both")
          ->check(CLI::IsMember({"noma", "tdma", "both"}));
  };

  auto* gen = app.add_subcommand("gen-topology", "generate and write a topology");
  add_common(gen, false);

  auto* solve = app.add_subcommand("solve", "run the iterative solver");
  add_common(solve, true);

  auto* analyze = app.add_subcommand("analyze", "optimal times, T_Upp and the E_11(t) curve");
  add_common(analyze, false);
  std::vector<std::string> curve_pc{"0", "5 mW", "10 mW"};
  int curve_points = 200;
  analyze->add_option("--curve-pc", curve_pc, "device circuit powers for the curve");
  analyze->add_option("--curve-points", curve_points)->check(CLI::Range(2, 100000));

  auto* verify = app.add_subcommand("verify", "check an allocation against every constraint");
  add_common(verify, false);
  std::string allocation_path;
  double tol = 1e-6;
  verify->add_option("--allocation", allocation_path, "allocation.json from solve")->required();
  verify->add_option("--tol", tol, "relative residual tolerance");

  auto* sweep = app.add_subcommand("sweep", "Monte-Carlo parameter sweep");
  add_common(sweep, true);
  std::string param = "circuit_device_w", grid = "0.5 mW,1 mW,2 mW,5 mW,10 mW";
  int reps = 50, workers = 0;
  double timeout = 120.0;
  bool no_wallclock = false;
  sweep->add_option("--param", param, "PC, Q, P, D, T or the scenario key");
  sweep->add_option("--grid", grid, "comma-separated values, units allowed");
  sweep->add_option("--replications", reps)->check(CLI::PositiveNumber);
  sweep->add_option("--workers", workers, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  sweep->add_option("--timeout-s", timeout, "per-row time limit")->check(CLI::NonNegativeNumber);
  sweep->add_flag("--no-wallclock", no_wallclock, "write 0 for wallclock_s (byte-stable output)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (gen->parsed()) return cmd_gen_topology(c);
    if (solve->parsed()) return cmd_solve(c);
    if (analyze->parsed()) {
      std::vector<double> pc;
      for (const auto& v : curve_pc) pc.push_back(m2m::parse_quantity(v, m2m::Dimension::Power, "--curve-pc"));
      return cmd_analyze(c, pc, curve_points);
    }
    if (verify->parsed()) return cmd_verify(c, allocation_path, tol);
    if (sweep->parsed()) return cmd_sweep(c, param, grid, reps, workers, timeout, no_wallclock);
  } catch (const m2m::Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", std::string(m2m::to_string(e.kind())).c_str(), e.what());
    return 1;
  }
  return 0;
}
