#include "m2m/energy.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "m2m/error.hpp"
#include "m2m/harvest.hpp"
#include "m2m/rates.hpp"

namespace m2m {

std::string_view to_string(Strategy s) { return s == Strategy::Noma ? "noma" : "tdma"; }

Strategy parse_strategy(std::string_view name) {
  if (name == "noma" || name == "NOMA") return Strategy::Noma;
  if (name == "tdma" || name == "TDMA") return Strategy::Tdma;
  fail(ErrorKind::Config, "unknown strategy '" + std::string(name) + "'");
}

Allocation Allocation::zeros(Strategy strategy, const NetworkTopology& topo) {
  Allocation a;
  a.strategy = strategy;
  a.p.assign(topo.n_devices, 0.0);
  a.q.assign(topo.n_gateways, 0.0);
  const std::size_t phases = strategy == Strategy::Noma ? topo.n_gateways + topo.n_clusters()
                                                        : topo.n_devices + topo.n_gateways;
  a.t.assign(phases, 0.0);
  return a;
}

double Allocation::device_time(const NetworkTopology& topo, std::size_t device) const {
  return strategy == Strategy::Noma ? t[topo.serving_gateway[device]] : t[device];
}

double Allocation::total_time() const { return std::accumulate(t.begin(), t.end(), 0.0); }

double ConstraintResiduals::worst() const {
  return std::max({device_rate, gateway_rate, causality, time_budget, device_power, gateway_power,
                   nonnegativity});
}

std::vector<double> gateway_payloads(const NetworkTopology& topo, const SystemParams& params) {
  std::vector<double> bits(topo.n_gateways, 0.0);
  for (std::size_t i = 0; i < topo.n_gateways; ++i)
    for (std::size_t j : topo.groups[i]) bits[i] += params.payload_bits[j];
  return bits;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_dimensions(const NetworkTopology& topo, const SystemParams& params,
                      const Allocation& alloc) {
  params.validate(topo.n_devices, topo.n_gateways);
  const std::size_t phases = alloc.strategy == Strategy::Noma
                                 ? topo.n_gateways + topo.n_clusters()
                                 : topo.n_devices + topo.n_gateways;
  if (alloc.p.size() != topo.n_devices || alloc.q.size() != topo.n_gateways ||
      alloc.t.size() != phases)
    fail(ErrorKind::Dimension,
         "allocation sized p=" + std::to_string(alloc.p.size()) + " q=" +
             std::to_string(alloc.q.size()) + " t=" + std::to_string(alloc.t.size()) +
             ", expected " + std::to_string(topo.n_devices) + "/" +
             std::to_string(topo.n_gateways) + "/" + std::to_string(phases));
}

double relative_excess(double required, double achieved) {
  if (required <= 0.0) return kNegInf;
  return (required - achieved) / required;
}

}  // namespace

EnergyReport total_energy(const NetworkTopology& topo, const SystemParams& params,
                          const Allocation& alloc) {
  check_dimensions(topo, params, alloc);
  const std::size_t n_dev = topo.n_devices;
  const std::size_t n_gw = topo.n_gateways;
  const auto& eh = params.eh;

  EnergyReport rep;
  rep.strategy = alloc.strategy;
  rep.device_consumed_j.assign(n_dev, 0.0);
  rep.device_harvested_j.assign(n_dev, 0.0);
  rep.device_rate_bits.assign(n_dev, 0.0);
  rep.gateway_rate_bits.assign(n_gw, 0.0);
  rep.phase_energy_j.assign(alloc.t.size(), 0.0);
  rep.conservation_margin_w = std::numeric_limits<double>::infinity();

  const auto payloads = gateway_payloads(topo, params);
  for (std::size_t j = 0; j < n_dev; ++j)
    rep.device_consumed_j[j] =
        alloc.device_time(topo, j) * (alloc.p[j] / params.pa_eff_device + params.circuit_device_w);

  if (alloc.strategy == Strategy::Noma) {
    for (std::size_t i = 0; i < n_gw; ++i) {
      for (std::size_t j : topo.groups[i]) {
        rep.phase_energy_j[i] += rep.device_consumed_j[j];
        rep.device_rate_bits[j] = noma_device_rate(topo, params, i, j, alloc.p, alloc.t[i]);
      }
    }
    for (std::size_t k = 0; k < topo.n_clusters(); ++k) {
      const double tau = alloc.t[n_gw + k];
      double radiated = 0.0;
      double drawn = 0.0;
      for (std::size_t i : topo.clusters[k]) {
        radiated += alloc.q[i];
        drawn += alloc.q[i] / params.pa_eff_gateway + params.circuit_gateway_w;
        rep.gateway_rate_bits[i] = noma_gateway_rate(topo, params, k, i, alloc.q, tau);
      }
      double harvested_power = 0.0;
      for (std::size_t j = 0; j < n_dev; ++j) {
        const double u = eh_harvest(topo.cluster_received_power(k, j, alloc.q), eh);
        harvested_power += u;
        rep.device_harvested_j[j] += tau * u;
      }
      rep.phase_energy_j[n_gw + k] = tau * (drawn - harvested_power);
      if (radiated > 0.0)
        rep.conservation_margin_w = std::min(rep.conservation_margin_w, radiated - harvested_power);
    }
  } else {
    for (std::size_t j = 0; j < n_dev; ++j) {
      rep.phase_energy_j[j] = rep.device_consumed_j[j];
      rep.device_rate_bits[j] = tdma_rate(topo.serving_gain[j], alloc.p[j], alloc.t[j], params);
    }
    for (std::size_t n = 0; n < n_gw; ++n) {
      const double tg = alloc.t[n_dev + n];
      double harvested_power = 0.0;
      for (std::size_t j = 0; j < n_dev; ++j) {
        const double u = eh_harvest(topo.gain(n, j) * alloc.q[n], eh);
        harvested_power += u;
        rep.device_harvested_j[j] += tg * u;
      }
      rep.gateway_rate_bits[n] = tdma_rate(topo.bs_gain[n], alloc.q[n], tg, params);
      rep.phase_energy_j[n_dev + n] =
          tg * (alloc.q[n] / params.pa_eff_gateway + params.circuit_gateway_w - harvested_power);
      if (alloc.q[n] > 0.0)
        rep.conservation_margin_w = std::min(rep.conservation_margin_w, alloc.q[n] - harvested_power);
    }
  }
  rep.total_j = std::accumulate(rep.phase_energy_j.begin(), rep.phase_energy_j.end(), 0.0);

  auto& r = rep.residuals;
  r.device_rate = r.gateway_rate = r.causality = r.device_power = r.gateway_power = kNegInf;
  for (std::size_t j = 0; j < n_dev; ++j) {
    r.device_rate = std::max(r.device_rate, relative_excess(params.payload_bits[j], rep.device_rate_bits[j]));
    const double used = rep.device_consumed_j[j];
    const double got = rep.device_harvested_j[j];
    const double scale = std::max({used, got, 1e-300});
    r.causality = std::max(r.causality, (used - got) / scale);
    r.device_power = std::max(r.device_power, (alloc.p[j] - params.max_power_device_w[j]) /
                                                  params.max_power_device_w[j]);
  }
  for (std::size_t i = 0; i < n_gw; ++i) {
    r.gateway_rate = std::max(r.gateway_rate, relative_excess(payloads[i], rep.gateway_rate_bits[i]));
    r.gateway_power = std::max(r.gateway_power, (alloc.q[i] - params.max_power_gateway_w[i]) /
                                                    params.max_power_gateway_w[i]);
  }
  r.time_budget = (alloc.total_time() - params.deadline_s) / params.deadline_s;
  double most_negative = 0.0;
  for (const auto* v : {&alloc.p, &alloc.q, &alloc.t})
    for (double x : *v) most_negative = std::min(most_negative, x);
  r.nonnegativity = -most_negative;
  for (double* x : {&r.device_rate, &r.gateway_rate, &r.causality, &r.device_power, &r.gateway_power})
    if (*x == kNegInf) *x = -1.0;
  return rep;
}

}  // namespace m2m
