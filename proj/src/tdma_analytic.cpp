#include "m2m/tdma_analytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "m2m/detail/mathx.hpp"
#include "m2m/error.hpp"
#include "m2m/harvest.hpp"

namespace m2m {

namespace {

double exponent_of(double t, double bits, const SystemParams& params, double cap) {
  if (!(t > 0.0)) fail(ErrorKind::Domain, "slot time must be positive, got " + std::to_string(t));
  const double x = std::numbers::ln2 * bits / (params.bandwidth_hz * t);
  if (x > cap)
    fail(ErrorKind::InfeasibleTime, "slot " + std::to_string(t) + " s drives the power exponent past " +
                                        std::to_string(cap) + " nats");
  return x;
}

}  // namespace

double tdma_power(double t, double bits, double gain, const SystemParams& params, double exponent_cap) {
  return params.noise_w * std::expm1(exponent_of(t, bits, params, exponent_cap)) / gain;
}

double tdma_device_energy(double t, double bits, double gain, const SystemParams& params,
                          double exponent_cap) {
  return t * (tdma_power(t, bits, gain, params, exponent_cap) / params.pa_eff_device +
              params.circuit_device_w);
}

double tdma_device_energy_derivative(double t, double bits, double gain, const SystemParams& params,
                                     double exponent_cap) {
  const double x = exponent_of(t, bits, params, exponent_cap);
  const double c = params.noise_w / (params.pa_eff_device * gain);
  return c * detail::expm1_minus_xexp(x) + params.circuit_device_w;
}

double tdma_optimal_time(double bits, double gain, const SystemParams& params, double tol,
                         double exponent_cap) {
  if (!(params.circuit_device_w > 0.0))
    fail(ErrorKind::Unbounded, "slot energy has no finite minimiser without circuit power");
  const double lo =
      std::max(1e-6, std::numbers::ln2 * bits / (params.bandwidth_hz * exponent_cap) * (1.0 + 1e-9));
  return convex_argmin_1d(
      [&](double t) { return tdma_device_energy_derivative(t, bits, gain, params, exponent_cap); }, lo,
      tol);
}

double tdma_min_time(double bits, double gain, double max_power_w, const SystemParams& params) {
  return bits / (params.bandwidth_hz * std::log2(1.0 + gain * max_power_w / params.noise_w));
}

Eigen::VectorXd TdmaLayout::pack(const TransformedAllocation& v) const {
  if (v.p_hat.size() != n_devices || v.q_hat.size() != n_gateways ||
      v.t.size() != n_devices + n_gateways)
    fail(ErrorKind::Dimension, "transformed allocation does not match the layout");
  Eigen::VectorXd x(dim());
  for (std::size_t j = 0; j < n_devices; ++j) {
    x[p_hat(j)] = v.p_hat[j];
    x[t_device(j)] = v.t[j];
  }
  for (std::size_t i = 0; i < n_gateways; ++i) {
    x[q_hat(i)] = v.q_hat[i];
    x[t_gateway(i)] = v.t[n_devices + i];
  }
  return x;
}

TransformedAllocation TdmaLayout::unpack(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) fail(ErrorKind::Dimension, "solver vector does not match the layout");
  TransformedAllocation v;
  v.p_hat.resize(n_devices);
  v.q_hat.resize(n_gateways);
  v.t.resize(n_devices + n_gateways);
  for (std::size_t j = 0; j < n_devices; ++j) {
    v.p_hat[j] = x[p_hat(j)];
    v.t[j] = x[t_device(j)];
  }
  for (std::size_t i = 0; i < n_gateways; ++i) {
    v.q_hat[i] = x[q_hat(i)];
    v.t[n_devices + i] = x[t_gateway(i)];
  }
  return v;
}

namespace {

// -t ubar(h q / t) over (q, t), extended by 0 at t = 0.
Term negative_perspective(int q_idx, int t_idx, double gain, const EhModel& eh, std::string label) {
  Term term;
  term.support = {q_idx, t_idx};
  term.label = std::move(label);
  term.eval = [gain, eh](std::span<const double> x, std::span<double> g) {
    const double q = x[0], t = x[1];
    if (!(t > 0.0)) {
      if (!g.empty()) g[0] = g[1] = 0.0;
      return 0.0;
    }
    const double r = gain * q / t;
    const double u = eh_harvest_smooth(r, eh);
    if (!g.empty()) {
      const double du = eh_harvest_smooth_derivative(r, eh);
      g[0] = -gain * du;
      g[1] = -(u - r * du);
    }
    return -t * u;
  };
  return term;
}

// 1 - (B / bits) t log2(1 + gain e / (noise t)) <= 0 over (e, t).
Term throughput_shortfall(int e_idx, int t_idx, double gain, double bits, const SystemParams& params,
                          std::string label) {
  Term term;
  term.support = {e_idx, t_idx};
  term.label = std::move(label);
  const double k = params.bandwidth_hz / bits;
  const double snr_scale = gain / params.noise_w;
  term.eval = [k, snr_scale](std::span<const double> x, std::span<double> g) {
    const double e = x[0], t = x[1];
    if (!(t > 0.0) || e < 0.0) return std::numeric_limits<double>::infinity();
    const double z = snr_scale * e / t;
    const double l2 = std::log1p(z) / std::numbers::ln2;
    if (!g.empty()) {
      g[0] = -k * snr_scale / ((1.0 + z) * std::numbers::ln2);
      g[1] = -k * (l2 - z / ((1.0 + z) * std::numbers::ln2));
    }
    return 1.0 - k * t * l2;
  };
  return term;
}

}  // namespace

TdmaProblem build_tdma_convex_problem(const NetworkTopology& topo, const SystemParams& params,
                                      const HarvestSets& sets, double time_floor) {
  params.validate(topo.n_devices, topo.n_gateways);
  const std::size_t n_dev = topo.n_devices, n_gw = topo.n_gateways;
  if (sets.per_device.size() != n_dev) fail(ErrorKind::Dimension, "harvest sets must cover every device");
  for (const auto& s : sets.per_device)
    for (std::size_t n : s)
      if (n >= n_gw) fail(ErrorKind::Dimension, "harvest set names a gateway out of range");

  TdmaProblem out;
  out.layout = {n_dev, n_gw};
  out.time_floor = time_floor;
  const auto& L = out.layout;
  ConvexProblem& P = out.problem;
  P = ConvexProblem(L.dim());
  const double T = params.deadline_s;
  const auto& eh = params.eh;

  for (std::size_t j = 0; j < n_dev; ++j) {
    P.lower[L.p_hat(j)] = 0.0;
    P.lower[L.t_device(j)] = time_floor;
  }
  for (std::size_t i = 0; i < n_gw; ++i) {
    P.lower[L.q_hat(i)] = 0.0;
    P.lower[L.t_gateway(i)] = time_floor;
  }

  {
    std::vector<int> idx;
    std::vector<double> coef;
    for (std::size_t j = 0; j < n_dev; ++j) {
      idx.insert(idx.end(), {L.p_hat(j), L.t_device(j)});
      coef.insert(coef.end(), {1.0 / params.pa_eff_device, params.circuit_device_w});
    }
    for (std::size_t i = 0; i < n_gw; ++i) {
      idx.insert(idx.end(), {L.q_hat(i), L.t_gateway(i)});
      coef.insert(coef.end(), {1.0 / params.pa_eff_gateway, params.circuit_gateway_w});
    }
    P.add_objective(ConvexProblem::linear_term(idx, coef, 0.0, "consumption"));
  }
  for (std::size_t j = 0; j < n_dev; ++j)
    for (std::size_t n : sets.per_device[j])
      P.add_objective(negative_perspective(L.q_hat(n), L.t_gateway(n), topo.gain(n, j), eh,
                                           "harvest d" + std::to_string(j) + " g" + std::to_string(n)));

  for (std::size_t j = 0; j < n_dev; ++j)
    P.add_constraint(throughput_shortfall(L.p_hat(j), L.t_device(j), topo.serving_gain[j],
                                          params.payload_bits[j], params, "device_rate"));
  const auto payload = gateway_payloads(topo, params);
  for (std::size_t i = 0; i < n_gw; ++i)
    if (payload[i] > 0.0)
      P.add_constraint(throughput_shortfall(L.q_hat(i), L.t_gateway(i), topo.bs_gain[i], payload[i],
                                            params, "gateway_rate"));

  const double energy_scale = eh.saturation_w * T;
  for (std::size_t j = 0; j < n_dev; ++j) {
    std::vector<Term> harvest;
    for (std::size_t n : sets.per_device[j])
      harvest.push_back(negative_perspective(0, 0, topo.gain(n, j), eh, {}));
    Term term;
    term.support = {L.p_hat(j), L.t_device(j)};
    for (std::size_t n : sets.per_device[j])
      term.support.insert(term.support.end(), {L.q_hat(n), L.t_gateway(n)});
    term.label = "causality";
    term.eval = [harvest = std::move(harvest), eta = params.pa_eff_device,
                 pc = params.circuit_device_w, energy_scale](std::span<const double> x,
                                                             std::span<double> g) {
      double v = x[0] / eta + x[1] * pc;
      if (!g.empty()) {
        g[0] = 1.0 / eta / energy_scale;
        g[1] = pc / energy_scale;
      }
      for (std::size_t h = 0; h < harvest.size(); ++h) {
        const auto xs = x.subspan(2 + 2 * h, 2);
        v += harvest[h].eval(xs, g.empty() ? g : g.subspan(2 + 2 * h, 2));
        if (!g.empty()) {
          g[2 + 2 * h] /= energy_scale;
          g[3 + 2 * h] /= energy_scale;
        }
      }
      return v / energy_scale;
    };
    P.add_constraint(std::move(term));
  }

  const double p0 = eh.threshold_w;
  for (std::size_t j = 0; j < n_dev; ++j)
    for (std::size_t n : sets.per_device[j])
      P.add_constraint(ConvexProblem::linear_term(
          {L.q_hat(n), L.t_gateway(n)},
          {-topo.gain(n, j) / (p0 * T), p0 * (1.0 + out.threshold_margin) / (p0 * T)}, 0.0,
          "threshold"));

  {
    std::vector<int> idx;
    std::vector<double> coef;
    for (std::size_t j = 0; j < n_dev; ++j) idx.push_back(L.t_device(j));
    for (std::size_t i = 0; i < n_gw; ++i) idx.push_back(L.t_gateway(i));
    coef.assign(idx.size(), 1.0 / T);
    P.add_constraint(ConvexProblem::linear_term(idx, coef, -1.0, "time_budget"));
  }
  for (std::size_t j = 0; j < n_dev; ++j) {
    const double cap = params.max_power_device_w[j];
    P.add_constraint(ConvexProblem::linear_term({L.p_hat(j), L.t_device(j)},
                                                {1.0 / (cap * T), -1.0 / T}, 0.0, "device_power"));
  }
  for (std::size_t i = 0; i < n_gw; ++i) {
    const double cap = params.max_power_gateway_w[i];
    P.add_constraint(ConvexProblem::linear_term({L.q_hat(i), L.t_gateway(i)},
                                                {1.0 / (cap * T), -1.0 / T}, 0.0, "gateway_power"));
  }
  return out;
}

double tdma_transformed_objective(const NetworkTopology& topo, const SystemParams& params,
                                  const HarvestSets& sets, const TransformedAllocation& v) {
  const std::size_t n_dev = topo.n_devices;
  double e = 0.0;
  for (std::size_t j = 0; j < n_dev; ++j)
    e += v.p_hat[j] / params.pa_eff_device + v.t[j] * params.circuit_device_w;
  for (std::size_t i = 0; i < topo.n_gateways; ++i)
    e += v.q_hat[i] / params.pa_eff_gateway + v.t[n_dev + i] * params.circuit_gateway_w;
  for (std::size_t j = 0; j < n_dev; ++j)
    for (std::size_t n : sets.per_device[j])
      e -= eh_perspective(topo.gain(n, j) * v.q_hat[n], v.t[n_dev + n], params.eh);
  return e;
}

TransformedAllocation transform_allocation(const Allocation& alloc) {
  if (alloc.strategy != Strategy::Tdma) fail(ErrorKind::Config, "only TDMA allocations transform");
  const std::size_t n_dev = alloc.p.size();
  if (alloc.t.size() != n_dev + alloc.q.size())
    fail(ErrorKind::Dimension, "TDMA allocation has inconsistent sizes");
  TransformedAllocation v;
  v.t = alloc.t;
  for (std::size_t j = 0; j < n_dev; ++j) v.p_hat.push_back(alloc.p[j] * alloc.t[j]);
  for (std::size_t i = 0; i < alloc.q.size(); ++i) v.q_hat.push_back(alloc.q[i] * alloc.t[n_dev + i]);
  return v;
}

Allocation recover_allocation(const TransformedAllocation& v, const SystemParams& params,
                              double cap_tol) {
  const std::size_t n_dev = v.p_hat.size(), n_gw = v.q_hat.size();
  if (v.t.size() != n_dev + n_gw) fail(ErrorKind::Dimension, "transformed allocation has inconsistent sizes");
  if (params.max_power_device_w.size() != n_dev || params.max_power_gateway_w.size() != n_gw)
    fail(ErrorKind::Dimension, "power caps do not match the transformed allocation");
  Allocation a;
  a.strategy = Strategy::Tdma;
  a.t = v.t;
  auto divide = [&](double energy, double t, double cap, const std::string& what) {
    if (t < 0.0 || energy < 0.0) fail(ErrorKind::Inconsistent, what + " has a negative entry");
    if (t == 0.0) {
      if (energy != 0.0) fail(ErrorKind::Inconsistent, what + " carries energy in a zero-length slot");
      return 0.0;
    }
    const double power = energy / t;
    if (power > cap * (1.0 + cap_tol))
      fail(ErrorKind::Inconsistent, what + " exceeds its power cap after recovery");
    return std::min(power, cap);
  };
  for (std::size_t j = 0; j < n_dev; ++j)
    a.p.push_back(divide(v.p_hat[j], v.t[j], params.max_power_device_w[j], "device " + std::to_string(j)));
  for (std::size_t i = 0; i < n_gw; ++i)
    a.q.push_back(divide(v.q_hat[i], v.t[n_dev + i], params.max_power_gateway_w[i],
                         "gateway " + std::to_string(i)));
  return a;
}

}  // namespace m2m
