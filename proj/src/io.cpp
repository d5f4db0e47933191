#include "m2m/io.hpp"

#include <string>

#include "m2m/error.hpp"

namespace m2m {

using nlohmann::json;

json to_json(const NetworkTopology& topo) {
  json devices = json::array(), gateways = json::array();
  for (const auto& p : topo.device_positions) devices.push_back({p.x_km, p.y_km});
  for (const auto& p : topo.gateway_positions) gateways.push_back({p.x_km, p.y_km});
  return {{"n_devices", topo.n_devices},
          {"n_gateways", topo.n_gateways},
          {"groups", topo.groups},
          {"clusters", topo.clusters},
          {"serving_gain", topo.serving_gain},
          {"cross_gain", topo.cross_gain},
          {"bs_gain", topo.bs_gain},
          {"device_positions_km", devices},
          {"gateway_positions_km", gateways}};
}

json to_json(const Allocation& alloc) {
  return {{"strategy", std::string(to_string(alloc.strategy))},
          {"p_w", alloc.p},
          {"q_w", alloc.q},
          {"t_s", alloc.t},
          {"total_time_s", alloc.total_time()}};
}

Allocation allocation_from_json(const json& j) {
  try {
    Allocation a;
    a.strategy = parse_strategy(j.at("strategy").get<std::string>());
    a.p = j.at("p_w").get<std::vector<double>>();
    a.q = j.at("q_w").get<std::vector<double>>();
    a.t = j.at("t_s").get<std::vector<double>>();
    return a;
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("allocation: ") + e.what());
  }
}

json to_json(const EnergyReport& r) {
  const auto& c = r.residuals;
  return {{"strategy", std::string(to_string(r.strategy))},
          {"total_j", r.total_j},
          {"device_consumed_j", r.device_consumed_j},
          {"device_harvested_j", r.device_harvested_j},
          {"device_rate_bits", r.device_rate_bits},
          {"gateway_rate_bits", r.gateway_rate_bits},
          {"phase_energy_j", r.phase_energy_j},
          {"conservation_margin_w", r.conservation_margin_w},
          {"residuals",
           {{"device_rate", c.device_rate},
            {"gateway_rate", c.gateway_rate},
            {"causality", c.causality},
            {"time_budget", c.time_budget},
            {"device_power", c.device_power},
            {"gateway_power", c.gateway_power},
            {"nonnegativity", c.nonnegativity}}}};
}

json to_json(const ViolationReport& r) {
  json fam = json::object();
  for (const auto& [name, v] : r.families) fam[name] = v;
  return {{"families", fam}, {"tol", r.tol}, {"worst", r.worst}, {"feasible", r.feasible}};
}

json to_json(const UpperTimeBound& b, const NetworkTopology& topo) {
  json groups = json::array();
  for (std::size_t i = 0; i < topo.n_gateways; ++i) {
    json devs = json::array();
    for (std::size_t j : topo.groups[i]) devs.push_back({{"device", j}, {"t_opt_s", b.device_times[j]}});
    groups.push_back({{"gateway", i}, {"t_opt_s", b.group_times[i]}, {"devices", devs}});
  }
  return {{"alpha", b.alpha},
          {"beta", b.beta},
          {"groups", groups},
          {"sum_seed_time_s", b.sum_seed_time},
          {"t_amp_s", b.t_amp},
          {"t_upp_s", b.t_upp},
          {"max_min_device_time_s", max_min_device_time(b, topo)}};
}

std::string trace_jsonl(const SolveTrace& trace) {
  std::string out;
  for (std::size_t v = 0; v < trace.objective.size(); ++v) {
    json sizes = json::array();
    for (const auto& s : trace.sets[v].per_device) sizes.push_back(s.size());
    json line{{"iteration", v},
              {"strategy", std::string(to_string(trace.strategy))},
              {"objective", trace.objective[v]},
              {"energy_j", trace.energy[v]},
              {"segment", trace.segment[v]},
              {"set_total", trace.sets[v].total()},
              {"set_sizes", sizes},
              {"inner_blocks", trace.inner_blocks[v]},
              {"worst_residual", trace.worst_residual[v]}};
    if (v + 1 == trace.objective.size()) {
      line["termination"] = trace.termination;
      line["start_repaired"] = trace.start_repaired;
      line["best_index"] = trace.best_index;
      line["newton_iters"] = trace.newton_iters;
      line["lp_pivots"] = trace.lp_pivots;
    }
    out += line.dump();
    out += '\n';
  }
  return out;
}

}  // namespace m2m
