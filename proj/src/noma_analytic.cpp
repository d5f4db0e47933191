#include "m2m/noma_analytic.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>

#include "m2m/detail/mathx.hpp"
#include "m2m/error.hpp"
#include "m2m/harvest.hpp"
#include "m2m/rates.hpp"

namespace m2m {

namespace {

void check_time(const GroupTimeProfile& g, double t, double cap) {
  if (!(t > 0.0)) fail(ErrorKind::Domain, "transmission time must be positive, got " + std::to_string(t));
  if (g.total_exponent() / t > cap)
    fail(ErrorKind::InfeasibleTime, "time " + std::to_string(t) + " s drives the power exponent past " +
                                        std::to_string(cap) + " nats");
}

// Exponent sum of the devices decoded after position j.
double tail_exponent(const GroupTimeProfile& g, std::size_t j) {
  return g.total_exponent() - g.prefix[j + 1];
}

}  // namespace

GroupTimeProfile GroupTimeProfile::from_parts(std::vector<double> gains,
                                              const std::vector<double>& payload_bits,
                                              double bandwidth_hz) {
  if (gains.size() != payload_bits.size())
    fail(ErrorKind::Dimension, "group gains and payloads differ in length");
  if (!(bandwidth_hz > 0)) fail(ErrorKind::Config, "bandwidth must be positive");
  GroupTimeProfile g;
  g.gains = std::move(gains);
  g.prefix.assign(1, 0.0);
  for (std::size_t l = 0; l < payload_bits.size(); ++l) {
    if (!(payload_bits[l] >= 0)) fail(ErrorKind::Config, "payloads must be non-negative");
    if (!(g.gains[l] > 0)) fail(ErrorKind::Config, "gains must be positive");
    g.a.push_back(std::numbers::ln2 * payload_bits[l] / bandwidth_hz);
    g.prefix.push_back(g.prefix.back() + g.a.back());
  }
  return g;
}

GroupTimeProfile GroupTimeProfile::build(const NetworkTopology& topo, const SystemParams& params,
                                         std::size_t gateway) {
  if (gateway >= topo.n_gateways) fail(ErrorKind::Dimension, "gateway index out of range");
  std::vector<double> gains, bits;
  for (std::size_t j : topo.groups[gateway]) {
    gains.push_back(topo.serving_gain[j]);
    bits.push_back(params.payload_bits[j]);
  }
  GroupTimeProfile g = from_parts(std::move(gains), bits, params.bandwidth_hz);
  g.gateway = gateway;
  g.devices = topo.groups[gateway];
  return g;
}

double GroupTimeProfile::b(std::size_t j, std::size_t l) const {
  if (l <= j) return 0.0;
  return prefix[l] - prefix[j + 1];
}

std::vector<double> closed_form_powers(const GroupTimeProfile& g, double t, double noise_w,
                                       double exponent_cap) {
  check_time(g, t, exponent_cap);
  const std::size_t n = g.size();
  std::vector<double> em1(n);
  for (std::size_t l = 0; l < n; ++l) em1[l] = std::expm1(g.a[l] / t);
  std::vector<double> p(n);
  for (std::size_t j = 0; j < n; ++j) {
    double inner = 1.0;
    for (std::size_t l = j + 1; l < n; ++l) inner += em1[l] * std::exp(g.b(j, l) / t);
    p[j] = noise_w / g.gains[j] * em1[j] * inner;
  }
  return p;
}

double device_energy(const GroupTimeProfile& g, std::size_t pos, double t, const SystemParams& params,
                     double exponent_cap) {
  if (pos >= g.size()) fail(ErrorKind::Dimension, "SIC position out of range");
  const auto p = closed_form_powers(g, t, params.noise_w, exponent_cap);
  return t * (p[pos] / params.pa_eff_device + params.circuit_device_w);
}

double device_energy_derivative(const GroupTimeProfile& g, std::size_t pos, double t,
                                const SystemParams& params, double exponent_cap) {
  if (pos >= g.size()) fail(ErrorKind::Dimension, "SIC position out of range");
  check_time(g, t, exponent_cap);
  // E = K t e^{y} expm1(x) + P^C t with x = a_j / t, y = (sum of later a) / t.
  const double k = params.noise_w / (params.pa_eff_device * g.gains[pos]);
  const double x = g.a[pos] / t;
  const double y = tail_exponent(g, pos) / t;
  return k * std::exp(y) * (detail::expm1_minus_xexp(x) - y * std::expm1(x)) + params.circuit_device_w;
}

double group_energy(const GroupTimeProfile& g, double t, const SystemParams& params,
                    double exponent_cap) {
  const auto p = closed_form_powers(g, t, params.noise_w, exponent_cap);
  double e = 0.0;
  for (double pj : p) e += t * (pj / params.pa_eff_device + params.circuit_device_w);
  return e;
}

double group_energy_derivative(const GroupTimeProfile& g, double t, const SystemParams& params,
                               double exponent_cap) {
  double d = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) d += device_energy_derivative(g, j, t, params, exponent_cap);
  return d;
}

namespace {

double lowest_time(const GroupTimeProfile& g, double cap) {
  return std::max(1e-6, g.total_exponent() / cap * (1.0 + 1e-9));
}

}  // namespace

double optimal_device_time(const GroupTimeProfile& g, std::size_t pos, const SystemParams& params,
                           double tol, double exponent_cap) {
  if (!(params.circuit_device_w > 0.0))
    fail(ErrorKind::Unbounded, "device energy has no finite minimiser without circuit power");
  return convex_argmin_1d(
      [&](double t) { return device_energy_derivative(g, pos, t, params, exponent_cap); },
      lowest_time(g, exponent_cap), tol);
}

double optimal_group_time(const GroupTimeProfile& g, const SystemParams& params, double tol,
                          double exponent_cap) {
  if (g.empty()) fail(ErrorKind::Domain, "optimal time of an empty group");
  if (!(params.circuit_device_w > 0.0))
    fail(ErrorKind::Unbounded, "group energy has no finite minimiser without circuit power");
  return convex_argmin_1d(
      [&](double t) { return group_energy_derivative(g, t, params, exponent_cap); },
      lowest_time(g, exponent_cap), tol);
}

double min_feasible_group_time(const GroupTimeProfile& g, const SystemParams& params,
                               double exponent_cap) {
  if (g.empty()) return 0.0;
  auto excess = [&](double t) {
    const auto p = closed_form_powers(g, t, params.noise_w, exponent_cap);
    double worst = -1.0;
    for (std::size_t l = 0; l < p.size(); ++l)
      worst = std::max(worst, p[l] / params.max_power_device_w[g.devices.empty() ? l : g.devices[l]] - 1.0);
    return worst;
  };
  double lo = lowest_time(g, exponent_cap);
  if (excess(lo) <= 0.0) return lo;
  double hi = std::max(1.0, 2.0 * lo);
  while (excess(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) fail(ErrorKind::Numeric, "power-cap time search diverged");
  }
  const double t = bisect(excess, lo, hi, 0.0, 1e-14);
  return t * (1.0 + 1e-12);
}

SeedSolution feasible_seed_noma(const NetworkTopology& topo, const SystemParams& params,
                                const SolverConfig& cfg) {
  params.validate(topo.n_devices, topo.n_gateways);
  const std::size_t n_gw = topo.n_gateways;
  const std::size_t n_dev = topo.n_devices;
  const std::size_t n_cl = topo.n_clusters();

  SeedSolution seed;
  Allocation& alloc = seed.allocation;
  alloc = Allocation::zeros(Strategy::Noma, topo);
  alloc.q = params.max_power_gateway_w;

  std::vector<double> consumed(n_dev, 0.0);
  for (std::size_t i = 0; i < n_gw; ++i) {
    if (topo.groups[i].empty()) continue;
    const auto g = GroupTimeProfile::build(topo, params, i);
    const double t_opt = optimal_group_time(g, params, cfg.bisect_tol, cfg.exponent_cap);
    const double t = std::max(t_opt, min_feasible_group_time(g, params, cfg.exponent_cap));
    alloc.t[i] = t;
    const auto p = closed_form_powers(g, t, params.noise_w, cfg.exponent_cap);
    for (std::size_t l = 0; l < g.size(); ++l) {
      alloc.p[g.devices[l]] = p[l];
      consumed[g.devices[l]] = t * (p[l] / params.pa_eff_device + params.circuit_device_w);
    }
  }

  const auto payload = gateway_payloads(topo, params);
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_cl));
  Eigen::MatrixXd harvest(static_cast<Eigen::Index>(n_dev), static_cast<Eigen::Index>(n_cl));
  std::vector<double> min_tau(n_cl, 0.0);
  for (std::size_t k = 0; k < n_cl; ++k) {
    double drawn = 0.0;
    for (std::size_t i : topo.clusters[k]) {
      drawn += alloc.q[i] / params.pa_eff_gateway + params.circuit_gateway_w;
      if (payload[i] > 0.0) {
        const double bits_per_s = noma_gateway_rate(topo, params, k, i, alloc.q, 1.0);
        min_tau[k] = std::max(min_tau[k], payload[i] / bits_per_s);
      }
    }
    double harvested = 0.0;
    for (std::size_t j = 0; j < n_dev; ++j) {
      const double u = eh_harvest(topo.cluster_received_power(k, j, alloc.q), params.eh);
      harvest(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = u;
      harvested += u;
    }
    cost[static_cast<Eigen::Index>(k)] = drawn - harvested;
  }

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  for (std::size_t k = 0; k < n_cl; ++k) {
    if (min_tau[k] <= 0.0) continue;
    Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_cl));
    r[static_cast<Eigen::Index>(k)] = -1.0;
    rows.push_back(r);
    rhs.push_back(-min_tau[k]);
  }
  for (std::size_t j = 0; j < n_dev; ++j) {
    if (consumed[j] <= 0.0) continue;
    rows.push_back(-harvest.row(static_cast<Eigen::Index>(j)).transpose());
    rhs.push_back(-consumed[j]);
  }
  Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_cl));
  Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    a.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    b[static_cast<Eigen::Index>(r)] = rhs[r];
  }

  LpResult lp;
  try {
    lp = solve_lp(LinearProgram::nonnegative(cost, a, b), cfg);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Infeasible)
      fail(ErrorKind::Infeasible,
           "seed relay-phase LP infeasible: some device cannot harvest its energy at full gateway power");
    throw;
  }
  for (std::size_t k = 0; k < n_cl; ++k) alloc.t[n_gw + k] = lp.x[static_cast<Eigen::Index>(k)];
  seed.lp_objective = lp.objective;
  seed.lp_pivots = lp.pivots;
  seed.phase_energy_j.resize(n_cl);
  for (std::size_t k = 0; k < n_cl; ++k)
    seed.phase_energy_j[k] = cost[static_cast<Eigen::Index>(k)] * alloc.t[n_gw + k];
  return seed;
}

UpperTimeBound t_upp(const NetworkTopology& topo, const SystemParams& params, const SolverConfig& cfg) {
  if (!(params.circuit_gateway_w > 0.0))
    fail(ErrorKind::Domain, "the time threshold needs positive gateway circuit power");
  if (!(params.circuit_device_w > 0.0))
    fail(ErrorKind::Unbounded, "the time threshold needs positive device circuit power");
  UpperTimeBound out;
  out.device_times.assign(topo.n_devices, 0.0);
  out.group_times.assign(topo.n_gateways, 0.0);
  out.beta.assign(topo.n_gateways, 0.0);
  for (std::size_t i = 0; i < topo.n_gateways; ++i) {
    if (topo.groups[i].empty()) continue;
    const auto g = GroupTimeProfile::build(topo, params, i);
    out.group_times[i] = optimal_group_time(g, params, cfg.bisect_tol, cfg.exponent_cap);
    for (std::size_t l = 0; l < g.size(); ++l)
      out.device_times[g.devices[l]] = optimal_device_time(g, l, params, cfg.bisect_tol, cfg.exponent_cap);
  }

  out.alpha = topo.clusters.front().size();
  for (const auto& c : topo.clusters) out.alpha = std::min(out.alpha, c.size());

  const auto& q = params.max_power_gateway_w;
  double beta_sum = 0.0;
  for (std::size_t i = 0; i < topo.n_gateways; ++i) {
    if (topo.groups[i].empty()) continue;
    double beta = std::numeric_limits<double>::infinity();
    for (std::size_t j : topo.groups[i]) {
      double best = 0.0;
      for (std::size_t k = 0; k < topo.n_clusters(); ++k)
        best = std::max(best, eh_harvest(topo.cluster_received_power(k, j, q), params.eh));
      beta = std::min(beta, best / params.circuit_device_w);
    }
    out.beta[i] = beta;
    beta_sum += beta;
  }

  out.seed = feasible_seed_noma(topo, params, cfg);
  out.sum_seed_time = out.seed.allocation.total_time();
  double relay_energy = 0.0;
  for (double e : out.seed.phase_energy_j) relay_energy += e;
  out.t_amp = (1.0 + beta_sum) * relay_energy /
              (static_cast<double>(out.alpha) * params.circuit_gateway_w);
  out.t_upp = std::max(out.sum_seed_time, out.t_amp);
  return out;
}

double max_min_device_time(const UpperTimeBound& bound, const NetworkTopology& topo) {
  double best = 0.0;
  for (std::size_t i = 0; i < topo.n_gateways; ++i) {
    if (topo.groups[i].empty()) continue;
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t j : topo.groups[i]) m = std::min(m, bound.device_times[j]);
    best = std::max(best, m);
  }
  return best;
}

}  // namespace m2m
