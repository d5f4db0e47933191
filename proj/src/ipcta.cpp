#include "m2m/ipcta.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>

#include "m2m/error.hpp"
#include "m2m/harvest.hpp"
#include "m2m/noma_analytic.hpp"
#include "m2m/rates.hpp"
#include "m2m/tdma_analytic.hpp"

namespace m2m {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kStartMargin = 1e-6;
constexpr double kStartSlack = 1e-4;  // relative slack of the constructed NOMA start
constexpr double kFullPowerBackoff = 1e-6;
constexpr double kThresholdMargin = 1e-9;
constexpr double kLpBlend = 1e-3;  // weight of the previous tau kept after an LP step

double relative_change(double now, double before) {
  return std::abs(now - before) / std::max(std::abs(before), 1e-12);
}

// Label of the most violated constraint at x.
std::string worst_label(const ConvexProblem& P, const Eigen::VectorXd& x) {
  std::string label = "box";
  double worst = -kInf;
  for (std::size_t c = 0; c < P.constraints.size(); ++c) {
    double g = P.constraint_value(c, x);
    if (!std::isfinite(g)) g = kInf;
    if (g > worst) {
      worst = g;
      label = P.constraints[c].label;
    }
  }
  return label;
}

}  // namespace

HarvestSets update_harvest_sets(Strategy strategy, const std::vector<double>& gateway_power,
                                const NetworkTopology& topo, double threshold_w) {
  if (gateway_power.size() != topo.n_gateways)
    fail(ErrorKind::Dimension, "gateway power vector does not match the topology");
  HarvestSets s;
  s.per_device.resize(topo.n_devices);
  for (std::size_t j = 0; j < topo.n_devices; ++j) {
    if (strategy == Strategy::Noma) {
      for (std::size_t k = 0; k < topo.n_clusters(); ++k)
        if (topo.cluster_received_power(k, j, gateway_power) > threshold_w) s.per_device[j].push_back(k);
    } else {
      for (std::size_t n = 0; n < topo.n_gateways; ++n)
        if (topo.gain(n, j) * gateway_power[n] > threshold_w) s.per_device[j].push_back(n);
    }
  }
  return s;
}

HarvestSets initial_harvest_sets(Strategy strategy, const NetworkTopology& topo,
                                 const SystemParams& params) {
  params.validate(topo.n_devices, topo.n_gateways);
  const auto reach = update_harvest_sets(strategy, params.max_power_gateway_w, topo,
                                         params.eh.threshold_w);
  HarvestSets s;
  s.per_device.resize(topo.n_devices);
  for (std::size_t j = 0; j < topo.n_devices; ++j) {
    const std::size_t own = strategy == Strategy::Noma
                                ? topo.cluster_of_gateway[topo.serving_gateway[j]]
                                : topo.serving_gateway[j];
    if (reach.contains(j, own))
      s.per_device[j] = {own};
    else
      s.per_device[j] = reach.per_device[j];
    if (s.per_device[j].empty())
      fail(ErrorKind::Infeasible, "device " + std::to_string(j) +
                                      " stays below the harvesting threshold at full gateway power");
  }
  return s;
}

double noma_set_objective(const NetworkTopology& topo, const SystemParams& params,
                          const HarvestSets& sets, const std::vector<double>& q,
                          const std::vector<double>& t) {
  const std::size_t n_gw = topo.n_gateways;
  double e = 0.0;
  for (std::size_t i = 0; i < n_gw; ++i) {
    if (topo.groups[i].empty()) continue;
    e += group_energy(GroupTimeProfile::build(topo, params, i), t[i], params);
  }
  for (std::size_t k = 0; k < topo.n_clusters(); ++k) {
    double rate = 0.0;
    for (std::size_t i : topo.clusters[k]) rate += q[i] / params.pa_eff_gateway + params.circuit_gateway_w;
    for (std::size_t j = 0; j < topo.n_devices; ++j)
      if (sets.contains(j, k)) rate -= eh_harvest_smooth(topo.cluster_received_power(k, j, q), params.eh);
    e += t[n_gw + k] * rate;
  }
  return e;
}

ViolationReport verify_solution(const NetworkTopology& topo, const SystemParams& params,
                                const Allocation& alloc, double tol) {
  const auto rep = total_energy(topo, params, alloc);
  const auto& r = rep.residuals;
  ViolationReport out;
  out.tol = tol;
  out.families = {{"device_rate", r.device_rate},       {"gateway_rate", r.gateway_rate},
                  {"causality", r.causality},           {"time_budget", r.time_budget},
                  {"device_power", r.device_power},     {"gateway_power", r.gateway_power},
                  {"nonnegativity", r.nonnegativity}};
  out.worst = r.worst();
  out.feasible = out.worst <= tol;
  return out;
}

namespace {

// ---------------------------------------------------------------- NOMA ----

// Phase times of nonempty groups, gateway powers and relay-phase times.
struct NomaPoint {
  std::vector<double> t;    // per gateway
  std::vector<double> q;    // per gateway
  std::vector<double> tau;  // per cluster

  std::vector<double> phases() const {
    std::vector<double> out = t;
    out.insert(out.end(), tau.begin(), tau.end());
    return out;
  }
};

enum class Kind { T, Q, Tau };
struct Ref {
  Kind kind;
  std::size_t index;
};

// Solver indices of the free coordinates; -1 marks a fixed one.
struct NomaVars {
  std::vector<int> t, q, tau;
  int dim = 0;

  int id(const Ref& r) const {
    switch (r.kind) {
      case Kind::T: return t[r.index];
      case Kind::Q: return q[r.index];
      case Kind::Tau: return tau[r.index];
    }
    return -1;
  }

  Eigen::VectorXd pack(const NomaPoint& x) const {
    Eigen::VectorXd v(dim);
    for (std::size_t i = 0; i < t.size(); ++i)
      if (t[i] >= 0) v[t[i]] = x.t[i];
    for (std::size_t i = 0; i < q.size(); ++i)
      if (q[i] >= 0) v[q[i]] = x.q[i];
    for (std::size_t k = 0; k < tau.size(); ++k)
      if (tau[k] >= 0) v[tau[k]] = x.tau[k];
    return v;
  }

  NomaPoint unpack(const Eigen::VectorXd& v, NomaPoint base) const {
    for (std::size_t i = 0; i < t.size(); ++i)
      if (t[i] >= 0) base.t[i] = v[t[i]];
    for (std::size_t i = 0; i < q.size(); ++i)
      if (q[i] >= 0) base.q[i] = v[q[i]];
    for (std::size_t k = 0; k < tau.size(); ++k)
      if (tau[k] >= 0) base.tau[k] = v[tau[k]];
    return base;
  }
};

using SlotFn = std::function<double(std::span<const double>, std::span<double>)>;

double fixed_value(const Ref& r, const NomaPoint& x) {
  switch (r.kind) {
    case Kind::T: return x.t[r.index];
    case Kind::Q: return x.q[r.index];
    case Kind::Tau: return x.tau[r.index];
  }
  return 0.0;
}

// Wraps a function of all referenced slots into a term over the free ones.
std::optional<Term> bind_term(const NomaVars& vars, const NomaPoint& fixed, const std::vector<Ref>& refs,
                         SlotFn fn, std::string label, bool linear = false) {
  Term term;
  std::vector<std::size_t> pos;
  std::vector<double> base(refs.size());
  for (std::size_t s = 0; s < refs.size(); ++s) {
    base[s] = fixed_value(refs[s], fixed);
    const int id = vars.id(refs[s]);
    if (id >= 0) {
      term.support.push_back(id);
      pos.push_back(s);
    }
  }
  if (term.support.empty()) return std::nullopt;
  term.label = std::move(label);
  term.linear = linear;
  term.eval = [fn = std::move(fn), pos = std::move(pos), base = std::move(base)](
                  std::span<const double> x, std::span<double> g) {
    std::vector<double> vals = base;
    for (std::size_t k = 0; k < pos.size(); ++k) vals[pos[k]] = x[k];
    if (g.empty()) return fn(vals, {});
    std::vector<double> full(vals.size(), 0.0);
    const double v = fn(vals, full);
    for (std::size_t k = 0; k < pos.size(); ++k) g[k] = full[pos[k]];
    return v;
  };
  return term;
}

struct NomaModel {
  const NetworkTopology& topo;
  const SystemParams& params;
  const SolverConfig& cfg;
  std::vector<GroupTimeProfile> profiles;  // by gateway; empty for empty groups
  std::vector<std::size_t> position;       // device -> SIC position in its group
  std::vector<double> t_min;               // by gateway
  std::vector<double> payload;             // by gateway

  NomaModel(const NetworkTopology& tp, const SystemParams& pr, const SolverConfig& c)
      : topo(tp), params(pr), cfg(c) {
    const std::size_t n_gw = topo.n_gateways;
    profiles.resize(n_gw);
    t_min.assign(n_gw, 0.0);
    position.assign(topo.n_devices, 0);
    payload = gateway_payloads(topo, params);
    for (std::size_t i = 0; i < n_gw; ++i) {
      if (topo.groups[i].empty()) continue;
      profiles[i] = GroupTimeProfile::build(topo, params, i);
      t_min[i] = min_feasible_group_time(profiles[i], params, cfg.exponent_cap);
      if (t_min[i] >= params.deadline_s)
        fail(ErrorKind::Infeasible, "device_rate: group of gateway " + std::to_string(i) + " needs " +
                                        std::to_string(t_min[i]) + " s at its power caps, beyond the deadline");
      for (std::size_t s = 0; s < topo.groups[i].size(); ++s) position[topo.groups[i][s]] = s;
    }
  }

  std::size_t n_gw() const { return topo.n_gateways; }
  std::size_t n_cl() const { return topo.n_clusters(); }

  double energy_scale() const { return params.eh.saturation_w * params.deadline_s; }

  NomaVars variables(bool free_t, bool free_q, bool free_tau) const {
    NomaVars v;
    v.t.assign(n_gw(), -1);
    v.q.assign(n_gw(), -1);
    v.tau.assign(n_cl(), -1);
    if (free_t)
      for (std::size_t i = 0; i < n_gw(); ++i)
        if (!topo.groups[i].empty()) v.t[i] = v.dim++;
    if (free_q)
      for (std::size_t i = 0; i < n_gw(); ++i) v.q[i] = v.dim++;
    if (free_tau)
      for (std::size_t k = 0; k < n_cl(); ++k) v.tau[k] = v.dim++;
    return v;
  }

  std::vector<Ref> cluster_q_refs(std::size_t k) const {
    std::vector<Ref> r;
    for (std::size_t n : topo.clusters[k]) r.push_back({Kind::Q, n});
    return r;
  }

  ConvexProblem build(const NomaVars& vars, const NomaPoint& fixed, const HarvestSets& sets) const {
    ConvexProblem P(vars.dim);
    const double T = params.deadline_s;
    const auto& eh = params.eh;
    const auto prm = std::make_shared<const SystemParams>(params);
    const double cap = cfg.exponent_cap;
    for (std::size_t i = 0; i < n_gw(); ++i) {
      if (vars.t[i] >= 0) {
        P.lower[vars.t[i]] = t_min[i];
        P.upper[vars.t[i]] = T;
      }
      if (vars.q[i] >= 0) {
        P.lower[vars.q[i]] = 0.0;
        P.upper[vars.q[i]] = params.max_power_gateway_w[i];
      }
    }
    for (std::size_t k = 0; k < n_cl(); ++k)
      if (vars.tau[k] >= 0) {
        P.lower[vars.tau[k]] = 0.0;
        P.upper[vars.tau[k]] = T;
      }

    auto add_objective = [&](std::optional<Term> t) {
      if (t) P.add_objective(std::move(*t));
    };
    auto add_constraint = [&](std::optional<Term> t) {
      if (t) P.add_constraint(std::move(*t));
    };

    // Device phases.
    for (std::size_t i = 0; i < n_gw(); ++i) {
      if (topo.groups[i].empty()) continue;
      add_objective(bind_term(vars, fixed, {{Kind::T, i}},
                         [prof = profiles[i], prm, cap](std::span<const double> v, std::span<double> g) {
                           try {
                             if (!g.empty()) g[0] = group_energy_derivative(prof, v[0], *prm, cap);
                             return group_energy(prof, v[0], *prm, cap);
                           } catch (const Error&) {
                             return kInf;
                           }
                         },
                         "group_energy"));
    }

    // Relay phases: consumption minus smoothed harvest over the sets.
    for (std::size_t k = 0; k < n_cl(); ++k) {
      std::vector<Ref> refs{{Kind::Tau, k}};
      const auto qr = cluster_q_refs(k);
      refs.insert(refs.end(), qr.begin(), qr.end());
      std::vector<std::vector<double>> gains;
      for (std::size_t j = 0; j < topo.n_devices; ++j) {
        if (!sets.contains(j, k)) continue;
        std::vector<double> h;
        for (std::size_t n : topo.clusters[k]) h.push_back(topo.gain(n, j));
        gains.push_back(std::move(h));
      }
      const double xi = params.pa_eff_gateway;
      const double circuit = params.circuit_gateway_w * static_cast<double>(topo.clusters[k].size());
      const bool q_free = vars.q[topo.clusters[k][0]] >= 0;
      const bool linear = !q_free || (vars.tau[k] < 0 && gains.empty());
      add_objective(bind_term(
          vars, fixed, refs,
          [gains, xi, circuit, eh](std::span<const double> v, std::span<double> g) {
            const double tau = v[0];
            const auto q = v.subspan(1);
            double rate = circuit;
            for (double qi : q) rate += qi / xi;
            if (!g.empty())
              for (std::size_t s = 0; s < q.size(); ++s) g[1 + s] = tau / xi;
            for (const auto& h : gains) {
              double x = 0.0;
              for (std::size_t s = 0; s < q.size(); ++s) x += h[s] * q[s];
              rate -= eh_harvest_smooth(x, eh);
              if (!g.empty()) {
                const double du = eh_harvest_smooth_derivative(x, eh);
                for (std::size_t s = 0; s < q.size(); ++s) g[1 + s] -= tau * h[s] * du;
              }
            }
            if (!g.empty()) g[0] = rate;
            return tau * rate;
          },
          "relay_energy", linear));
    }

    // Gateway throughput in SIC order: the phase time covers the payload.
    for (std::size_t k = 0; k < n_cl(); ++k) {
      const auto& cl = topo.clusters[k];
      for (std::size_t s = 0; s < cl.size(); ++s) {
        const std::size_t i = cl[s];
        if (!(payload[i] > 0.0)) continue;
        std::vector<Ref> refs{{Kind::Tau, k}};
        std::vector<double> h;
        for (std::size_t l = s; l < cl.size(); ++l) {
          refs.push_back({Kind::Q, cl[l]});
          h.push_back(topo.bs_gain[cl[l]]);
        }
        const double c = std::numbers::ln2 * payload[i] / params.bandwidth_hz;
        const double scale = h[0] * params.max_power_gateway_w[i];
        const double noise = params.noise_w;
        add_constraint(bind_term(
            vars, fixed, refs,
            [h, c, scale, noise, cap](std::span<const double> v, std::span<double> g) {
              const double tau = v[0];
              if (!(tau > 0.0) || c / tau > cap) return kInf;
              double interference = noise;
              for (std::size_t l = 1; l < h.size(); ++l) interference += h[l] * v[1 + l];
              const double em = std::expm1(c / tau);
              if (!g.empty()) {
                g[0] = -(c / (tau * tau)) * (em + 1.0) * interference / scale;
                g[1] = -h[0] / scale;
                for (std::size_t l = 1; l < h.size(); ++l) g[1 + l] = em * h[l] / scale;
              }
              return (em * interference - h[0] * v[1]) / scale;
            },
            "gateway_rate", vars.tau[k] < 0));
      }
    }

    // Energy causality per device.
    const double escale = energy_scale();
    for (std::size_t j = 0; j < topo.n_devices; ++j) {
      const std::size_t i = topo.serving_gateway[j];
      std::vector<Ref> refs{{Kind::T, i}};
      std::vector<std::vector<double>> gains;
      for (std::size_t k : sets.per_device[j]) {
        refs.push_back({Kind::Tau, k});
        std::vector<double> h;
        for (std::size_t n : topo.clusters[k]) {
          refs.push_back({Kind::Q, n});
          h.push_back(topo.gain(n, j));
        }
        gains.push_back(std::move(h));
      }
      const std::size_t pos = position[j];
      add_constraint(bind_term(
          vars, fixed, refs,
          [prof = profiles[i], prm, cap, pos, gains, escale, eh](std::span<const double> v, std::span<double> g) {
            double val;
            try {
              val = device_energy(prof, pos, v[0], *prm, cap);
              if (!g.empty()) g[0] = device_energy_derivative(prof, pos, v[0], *prm, cap) / escale;
            } catch (const Error&) {
              return kInf;
            }
            std::size_t at = 1;
            for (const auto& h : gains) {
              const double tau = v[at];
              double x = 0.0;
              for (std::size_t s = 0; s < h.size(); ++s) x += h[s] * v[at + 1 + s];
              const double u = eh_harvest_smooth(x, eh);
              val -= tau * u;
              if (!g.empty()) {
                const double du = eh_harvest_smooth_derivative(x, eh);
                g[at] = -u / escale;
                for (std::size_t s = 0; s < h.size(); ++s) g[at + 1 + s] = -tau * h[s] * du / escale;
              }
              at += 1 + h.size();
            }
            return val / escale;
          },
          "causality"));
    }

    // Harvest threshold for every set member.
    const double p0 = eh.threshold_w;
    for (std::size_t j = 0; j < topo.n_devices; ++j)
      for (std::size_t k : sets.per_device[j]) {
        std::vector<double> h;
        for (std::size_t n : topo.clusters[k]) h.push_back(topo.gain(n, j));
        add_constraint(bind_term(
            vars, fixed, cluster_q_refs(k),
            [h, p0](std::span<const double> v, std::span<double> g) {
              double x = 0.0;
              for (std::size_t s = 0; s < h.size(); ++s) {
                x += h[s] * v[s];
                if (!g.empty()) g[s] = -h[s] / p0;
              }
              return (p0 * (1.0 + kThresholdMargin) - x) / p0;
            },
            "threshold", true));
      }

    // Time budget.
    {
      std::vector<Ref> refs;
      for (std::size_t i = 0; i < n_gw(); ++i)
        if (!topo.groups[i].empty()) refs.push_back({Kind::T, i});
      for (std::size_t k = 0; k < n_cl(); ++k) refs.push_back({Kind::Tau, k});
      add_constraint(bind_term(
          vars, fixed, refs,
          [T](std::span<const double> v, std::span<double> g) {
            double s = 0.0;
            for (std::size_t a = 0; a < v.size(); ++a) {
              s += v[a];
              if (!g.empty()) g[a] = 1.0 / T;
            }
            return s / T - 1.0;
          },
          "time_budget", true));
    }
    return P;
  }

  double objective(const HarvestSets& sets, const NomaPoint& x) const {
    return noma_set_objective(topo, params, sets, x.q, x.phases());
  }

  // Shortest relay phase meeting every gateway payload of cluster k at powers q.
  double min_relay_time(std::size_t k, const std::vector<double>& q) const {
    double tau = 0.0;
    for (std::size_t i : topo.clusters[k]) {
      if (!(payload[i] > 0.0)) continue;
      const double bits_per_s = noma_gateway_rate(topo, params, k, i, q, 1.0);
      if (!(bits_per_s > 0.0)) return kInf;
      tau = std::max(tau, payload[i] / bits_per_s);
    }
    return tau;
  }

  // LP over the relay-phase times with powers and device phases fixed.
  std::vector<double> relay_lp(const HarvestSets& sets, const NomaPoint& x, int& pivots) const {
    const std::size_t n_cl = this->n_cl();
    const auto K = static_cast<Eigen::Index>(n_cl);
    Eigen::VectorXd cost(K);
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(topo.n_devices), K);
    for (std::size_t k = 0; k < n_cl; ++k) {
      double c = 0.0;
      for (std::size_t i : topo.clusters[k]) c += x.q[i] / params.pa_eff_gateway + params.circuit_gateway_w;
      for (std::size_t j = 0; j < topo.n_devices; ++j)
        if (sets.contains(j, k)) {
          const double uj = eh_harvest_smooth(topo.cluster_received_power(k, j, x.q), params.eh);
          u(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = uj;
          c -= uj;
        }
      cost[static_cast<Eigen::Index>(k)] = c;
    }
    std::vector<Eigen::VectorXd> rows;
    std::vector<double> rhs;
    for (std::size_t k = 0; k < n_cl; ++k) {
      const double lo = min_relay_time(k, x.q);
      if (!(lo > 0.0)) continue;
      Eigen::VectorXd r = Eigen::VectorXd::Zero(K);
      r[static_cast<Eigen::Index>(k)] = -1.0;
      rows.push_back(r);
      rhs.push_back(-lo);
    }
    for (std::size_t j = 0; j < topo.n_devices; ++j) {
      const std::size_t i = topo.serving_gateway[j];
      const double e = device_energy(profiles[i], position[j], x.t[i], params, cfg.exponent_cap);
      rows.push_back(-u.row(static_cast<Eigen::Index>(j)).transpose());
      rhs.push_back(-e);
    }
    double device_time = 0.0;
    for (double ti : x.t) device_time += ti;
    rows.push_back(Eigen::VectorXd::Ones(K));
    rhs.push_back(params.deadline_s - device_time);

    Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), K);
    Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      a.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
      b[static_cast<Eigen::Index>(r)] = rhs[r];
    }
    const auto lp = solve_lp(LinearProgram::nonnegative(cost, a, b), cfg);
    pivots += lp.pivots;
    std::vector<double> tau(n_cl);
    for (std::size_t k = 0; k < n_cl; ++k) tau[k] = lp.x[static_cast<Eigen::Index>(k)];
    return tau;
  }

  Allocation allocation(const NomaPoint& x) const {
    Allocation a = Allocation::zeros(Strategy::Noma, topo);
    a.q = x.q;
    for (std::size_t i = 0; i < n_gw(); ++i) {
      if (topo.groups[i].empty()) continue;
      a.t[i] = x.t[i];
      const auto p = closed_form_powers(profiles[i], x.t[i], params.noise_w, cfg.exponent_cap);
      for (std::size_t s = 0; s < p.size(); ++s) a.p[topo.groups[i][s]] = p[s];
    }
    for (std::size_t k = 0; k < n_cl(); ++k) a.t[n_gw() + k] = x.tau[k];
    return a;
  }
};

constexpr double kVerifyTol = 1e-6;

// Lowest gated energy among verified iterates.
struct BestIterate {
  double energy = kInf;
  Allocation allocation;
  HarvestSets sets;
};

void record(SolveTrace& trace, BestIterate& best, const NetworkTopology& topo,
            const SystemParams& params, const HarvestSets& sets, std::size_t segment,
            double objective, const Allocation& alloc, int blocks) {
  const auto rep = total_energy(topo, params, alloc);
  trace.objective.push_back(objective);
  trace.energy.push_back(rep.total_j);
  trace.segment.push_back(segment);
  trace.sets.push_back(sets);
  trace.inner_blocks.push_back(blocks);
  trace.worst_residual.push_back(rep.residuals.worst());
  if (rep.residuals.worst() <= kVerifyTol && rep.total_j < best.energy) {
    best.energy = rep.total_j;
    best.allocation = alloc;
    best.sets = sets;
    trace.best_index = trace.objective.size() - 1;
  }
}

IpctaResult finish(const NetworkTopology& topo, const SystemParams& params, Allocation last,
                   SolveTrace trace, HarvestSets sets, BestIterate best) {
  IpctaResult out;
  if (std::isfinite(best.energy)) {
    last = std::move(best.allocation);
    sets = std::move(best.sets);
  } else {
    trace.best_index = trace.objective.size() - 1;
  }
  out.report = total_energy(topo, params, last);
  out.verification = verify_solution(topo, params, last, kVerifyTol);
  out.allocation = std::move(last);
  out.trace = std::move(trace);
  out.sets = std::move(sets);
  return out;
}

// Each cluster relays for the time that minimises its own relay energy. At a
// given time the gateways use the minimal SIC powers, scaled up until every
// served device clears P0 and harvests what it spends at the seed.
NomaPoint relay_optimal_start(const NomaModel& model, NomaPoint x, const Allocation& seed) {
  const auto& topo = model.topo;
  const auto& params = model.params;
  const auto& cfg = model.cfg;
  const auto payload = gateway_payloads(topo, params);
  const double p0 = params.eh.threshold_w * (1.0 + kStartSlack);
  const double top = eh_harvest(1e6, params.eh);

  std::vector<double> need(topo.n_devices, 0.0);
  for (std::size_t j = 0; j < topo.n_devices; ++j) {
    const double t = seed.t[topo.serving_gateway[j]];
    need[j] = t * (seed.p[j] / params.pa_eff_device + params.circuit_device_w) * (1.0 + kStartSlack);
  }
  // Received power at which the harvester delivers `w` watts.
  auto received_for = [&](double w) {
    if (eh_harvest(p0, params.eh) >= w) return p0;
    double hi = 2.0 * p0;
    while (eh_harvest(hi, params.eh) < w) hi *= 2.0;
    return bisect([&](double r) { return eh_harvest(r, params.eh) - w; }, p0, hi, 0.0, 1e-12);
  };

  for (std::size_t k = 0; k < topo.n_clusters(); ++k) {
    const auto& cl = topo.clusters[k];
    std::vector<double> gains, bits, cap;
    for (std::size_t n : cl) {
      gains.push_back(topo.bs_gain[n]);
      bits.push_back(payload[n]);
      cap.push_back(params.max_power_gateway_w[n] * (1.0 - kFullPowerBackoff));
    }
    std::vector<std::size_t> served;
    for (std::size_t j = 0; j < topo.n_devices; ++j)
      if (topo.cluster_of_gateway[topo.serving_gateway[j]] == k) served.push_back(j);
    const auto g = GroupTimeProfile::from_parts(gains, bits, params.bandwidth_hz);
    const bool silent = g.total_exponent() == 0.0;

    // Gateway powers and relay energy at relay time tau; empty when infeasible.
    auto powers_at = [&](double tau) -> std::vector<double> {
      std::vector<double> base = cap;
      double scale = 0.0;
      if (!silent) {
        try {
          base = closed_form_powers(g, tau, params.noise_w, cfg.exponent_cap);
        } catch (const Error&) {
          return {};
        }
        scale = 1.0;
      }
      for (std::size_t j : served) {
        if (need[j] / tau >= top) return {};
        double rx = 0.0;
        for (std::size_t s = 0; s < cl.size(); ++s) rx += topo.gain(cl[s], j) * base[s];
        if (!(rx > 0.0)) return {};
        scale = std::max(scale, received_for(need[j] / tau) / rx);
      }
      for (std::size_t s = 0; s < cl.size(); ++s) {
        base[s] *= scale;
        if (base[s] > cap[s]) return {};
      }
      return base;
    };
    auto energy_at = [&](double tau) {
      const auto q = powers_at(tau);
      if (q.empty()) return kInf;
      double e = 0.0;
      for (std::size_t s = 0; s < cl.size(); ++s) e += q[s] / params.pa_eff_gateway + params.circuit_gateway_w;
      for (std::size_t j : served) {
        double rx = 0.0;
        for (std::size_t s = 0; s < cl.size(); ++s) rx += topo.gain(cl[s], j) * q[s];
        e -= eh_harvest(rx, params.eh);
      }
      return tau * e;
    };

    // Log grid over the relay time, then a finer grid around the best point.
    const double lo = silent ? 1e-6 * params.deadline_s : g.total_exponent() / cfg.exponent_cap;
    double a = lo, b = params.deadline_s, best_tau = 0.0, best = kInf;
    for (int pass = 0; pass < 2 && a < b; ++pass) {
      const int n = 200;
      const double ratio = std::pow(b / a, 1.0 / (n - 1));
      double found = 0.0;
      for (int i = 0; i < n; ++i) {
        const double tau = a * std::pow(ratio, i);
        const double e = energy_at(tau);
        if (e < best) {
          best = e;
          best_tau = tau;
          found = tau;
        }
      }
      if (found == 0.0) break;
      a = found / ratio;
      b = found * ratio;
    }
    if (!std::isfinite(best)) continue;
    const auto q = powers_at(best_tau);
    for (std::size_t s = 0; s < cl.size(); ++s) x.q[cl[s]] = q[s];
    x.tau[k] = best_tau * (1.0 + kStartSlack);
  }
  return x;
}

NomaPoint noma_start(const NomaModel& model, const HarvestSets& sets, SolveTrace& trace) {
  const auto& topo = model.topo;
  const auto& params = model.params;
  const auto& cfg = model.cfg;
  const auto seed = feasible_seed_noma(topo, params, cfg);
  trace.lp_pivots += seed.lp_pivots;

  NomaPoint x;
  x.t.assign(topo.n_gateways, 0.0);
  for (std::size_t i = 0; i < topo.n_gateways; ++i) x.t[i] = seed.allocation.t[i];
  x.q = params.max_power_gateway_w;
  for (double& q : x.q) q *= 1.0 - kFullPowerBackoff;
  x.tau.assign(topo.n_clusters(), 0.0);
  for (std::size_t k = 0; k < topo.n_clusters(); ++k) x.tau[k] = seed.allocation.t[topo.n_gateways + k];

  // Powers fixed: convex in the phase times.
  const auto time_vars = model.variables(true, false, true);
  const auto all_vars = model.variables(true, true, true);
  auto times_for = [&](const NomaPoint& at) -> std::optional<NomaPoint> {
    const auto problem = model.build(time_vars, at, sets);
    auto p1 = find_strictly_feasible(problem, time_vars.pack(at), cfg, kStartMargin);
    trace.newton_iters += p1.newton_iters;
    if (!p1.feasible) return std::nullopt;
    // Terms over the fixed powers alone are not in the time problem.
    NomaPoint out = time_vars.unpack(p1.x, at);
    if (!model.build(all_vars, out, sets).strictly_feasible(all_vars.pack(out))) return std::nullopt;
    return out;
  };
  if (auto relaxed = times_for(relay_optimal_start(model, x, seed.allocation))) return *relaxed;
  if (auto full = times_for(x)) return *full;

  // The deadline cannot be met at full power; release the powers too.
  trace.start_repaired = true;
  const auto full = model.build(all_vars, x, sets);
  auto p2 = find_strictly_feasible(full, all_vars.pack(x), cfg, kStartMargin);
  trace.newton_iters += p2.newton_iters;
  if (!p2.feasible)
    fail(ErrorKind::Infeasible, "no strictly feasible NOMA start: " + worst_label(full, p2.x) +
                                    " violated by " + std::to_string(p2.max_violation));
  return all_vars.unpack(p2.x, x);
}

// ---------------------------------------------------------------- TDMA ----

TransformedAllocation tdma_start_guess(const NetworkTopology& topo, const SystemParams& params,
                                       const SolverConfig& cfg) {
  const std::size_t n_dev = topo.n_devices, n_gw = topo.n_gateways;
  TransformedAllocation v;
  v.t.assign(n_dev + n_gw, 0.0);
  for (std::size_t j = 0; j < n_dev; ++j) {
    const double bits = params.payload_bits[j], h = topo.serving_gain[j];
    double t = params.circuit_device_w > 0.0 ? tdma_optimal_time(bits, h, params, cfg.bisect_tol, cfg.exponent_cap)
                                             : params.deadline_s / static_cast<double>(n_dev + n_gw);
    const double t_min = tdma_min_time(bits, h, params.max_power_device_w[j], params);
    if (t_min >= params.deadline_s)
      fail(ErrorKind::Infeasible, "device_rate: device " + std::to_string(j) + " needs " +
                                      std::to_string(t_min) + " s at its power cap, beyond the deadline");
    t = std::max(t, t_min) * (1.0 + 1e-6);
    v.t[j] = t;
    v.p_hat.push_back(t * tdma_power(t, bits, h, params, cfg.exponent_cap) * (1.0 + 1e-6));
  }
  const auto payload = gateway_payloads(topo, params);
  for (std::size_t i = 0; i < n_gw; ++i) {
    const double q = params.max_power_gateway_w[i] * (1.0 - kFullPowerBackoff);
    double t = payload[i] > 0.0 ? 1.01 * payload[i] / tdma_rate(topo.bs_gain[i], q, 1.0, params)
                                : 1e-3 * params.deadline_s;
    v.t[n_dev + i] = t;
    v.q_hat.push_back(q * t);
  }
  return v;
}

}  // namespace

IpctaResult ipcta_noma(const NetworkTopology& topo, const SystemParams& params, const SolverConfig& cfg) {
  params.validate(topo.n_devices, topo.n_gateways);
  cfg.validate();
  const NomaModel model(topo, params, cfg);
  SolveTrace trace;
  trace.strategy = Strategy::Noma;

  BestIterate best;
  HarvestSets sets = initial_harvest_sets(Strategy::Noma, topo, params);
  NomaPoint x = noma_start(model, sets, trace);
  std::size_t segment = 0;
  double u = model.objective(sets, x);
  record(trace, best, topo, params, sets, segment, u, model.allocation(x), 0);

  const auto block_vars = model.variables(true, true, false);
  const double inner_tol = cfg.theta * cfg.inner_theta_ratio;
  std::vector<HarvestSets> seen{sets};

  for (int v = 1;; ++v) {
    cfg.check_deadline();
    int blocks = 0;
    double u_inner = u;
    while (blocks < cfg.inner_max) {
      ++blocks;
      const double u_block = u_inner;
      // Powers and device phases with the relay phases fixed.
      const auto P = model.build(block_vars, x, sets);
      Eigen::VectorXd start = block_vars.pack(x);
      if (!P.strictly_feasible(start)) {
        const auto p1 = find_strictly_feasible(P, start, cfg, kStartMargin);
        trace.newton_iters += p1.newton_iters;
        if (!p1.feasible) break;
        start = p1.x;
      }
      const auto r = solve_convex(P, start, cfg);
      trace.newton_iters += r.newton_iters;
      const NomaPoint cand = block_vars.unpack(r.x, x);
      const double u_cand = model.objective(sets, cand);
      if (u_cand <= u_inner) {
        x = cand;
        u_inner = u_cand;
      }

      // Relay phases by LP, pulled slightly towards the current interior point.
      try {
        const auto tau_lp = model.relay_lp(sets, x, trace.lp_pivots);
        NomaPoint next = x;
        for (std::size_t k = 0; k < tau_lp.size(); ++k)
          next.tau[k] = (1.0 - kLpBlend) * tau_lp[k] + kLpBlend * x.tau[k];
        const double u_next = model.objective(sets, next);
        if (u_next <= u_inner) {
          x = std::move(next);
          u_inner = u_next;
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Infeasible && e.kind() != ErrorKind::Unbounded) throw;
      }
      if (relative_change(u_inner, u_block) < inner_tol) break;
    }

    const double u_prev = u;
    u = u_inner;
    record(trace, best, topo, params, sets, segment, u, model.allocation(x), blocks);

    HarvestSets next = update_harvest_sets(Strategy::Noma, x.q, topo, params.eh.threshold_w);
    const bool stable = next == sets;
    if (stable && relative_change(u, u_prev) < cfg.theta) {
      trace.termination = "converged";
      break;
    }
    if (v >= cfg.v_max) {
      trace.termination = "max_iterations";
      break;
    }
    if (!stable) {
      if (std::find(seen.begin(), seen.end(), next) != seen.end()) {
        trace.termination = "cycle";
        break;
      }
      seen.push_back(next);
      sets = std::move(next);
      ++segment;
      u = model.objective(sets, x);
    }
  }
  return finish(topo, params, model.allocation(x), std::move(trace), std::move(sets), std::move(best));
}

IpctaResult ipcta_tdma(const NetworkTopology& topo, const SystemParams& params, const SolverConfig& cfg) {
  params.validate(topo.n_devices, topo.n_gateways);
  cfg.validate();
  const std::size_t n_dev = topo.n_devices;
  SolveTrace trace;
  trace.strategy = Strategy::Tdma;

  BestIterate best;
  HarvestSets sets = initial_harvest_sets(Strategy::Tdma, topo, params);
  auto built = build_tdma_convex_problem(topo, params, sets);
  const double floor = built.time_floor;
  TransformedAllocation v = tdma_start_guess(topo, params, cfg);
  {
    const auto p1 = find_strictly_feasible(built.problem, built.layout.pack(v), cfg, kStartMargin);
    trace.newton_iters += p1.newton_iters;
    if (!p1.feasible)
      fail(ErrorKind::Infeasible, "no strictly feasible TDMA start: " +
                                      worst_label(built.problem, p1.x) + " violated by " +
                                      std::to_string(p1.max_violation));
    trace.start_repaired = !built.problem.strictly_feasible(built.layout.pack(v));
    v = built.layout.unpack(p1.x);
  }

  auto recover = [&](const TransformedAllocation& w) {
    TransformedAllocation z = w;
    for (std::size_t s = 0; s < z.t.size(); ++s)
      if (z.t[s] < 2.0 * floor) {
        z.t[s] = 0.0;
        if (s < n_dev)
          z.p_hat[s] = 0.0;
        else
          z.q_hat[s - n_dev] = 0.0;
      }
    Allocation a = recover_allocation(z, params);
    for (std::size_t j = 0; j < n_dev; ++j)
      if (a.t[j] > 0.0)
        a.p[j] = std::min(tdma_power(a.t[j], params.payload_bits[j], topo.serving_gain[j], params,
                                     cfg.exponent_cap),
                          params.max_power_device_w[j]);
    return a;
  };

  std::size_t segment = 0;
  double u = tdma_transformed_objective(topo, params, sets, v);
  Allocation alloc = recover(v);
  record(trace, best, topo, params, sets, segment, u, alloc, 0);
  std::vector<HarvestSets> seen{sets};

  for (int it = 1;; ++it) {
    cfg.check_deadline();
    Eigen::VectorXd start = built.layout.pack(v);
    if (!built.problem.strictly_feasible(start)) {
      const auto p1 = find_strictly_feasible(built.problem, start, cfg, kStartMargin);
      trace.newton_iters += p1.newton_iters;
      if (!p1.feasible) fail(ErrorKind::Infeasible, "TDMA iterate lost strict feasibility");
      start = p1.x;
    }
    const auto r = solve_convex(built.problem, start, cfg);
    trace.newton_iters += r.newton_iters;
    const auto cand = built.layout.unpack(r.x);
    const double u_cand = tdma_transformed_objective(topo, params, sets, cand);
    const double u_prev = u;
    if (u_cand <= u) {
      v = cand;
      u = u_cand;
    }
    alloc = recover(v);
    record(trace, best, topo, params, sets, segment, u, alloc, 1);

    HarvestSets next = update_harvest_sets(Strategy::Tdma, alloc.q, topo, params.eh.threshold_w);
    const bool stable = next == sets;
    if (stable || (it >= 2 && relative_change(u, u_prev) < cfg.theta)) {
      trace.termination = "converged";
      break;
    }
    if (it >= cfg.v_max) {
      trace.termination = "max_iterations";
      break;
    }
    if (std::find(seen.begin(), seen.end(), next) != seen.end()) {
      trace.termination = "cycle";
      break;
    }
    seen.push_back(next);
    sets = std::move(next);
    ++segment;
    built = build_tdma_convex_problem(topo, params, sets, floor);
    u = tdma_transformed_objective(topo, params, sets, v);
  }
  return finish(topo, params, std::move(alloc), std::move(trace), std::move(sets), std::move(best));
}

ConvexProblem build_noma_problem(const NetworkTopology& topo, const SystemParams& params,
                                 const HarvestSets& sets, const Allocation& at, bool free_relay_times,
                                 const SolverConfig& cfg) {
  params.validate(topo.n_devices, topo.n_gateways);
  const NomaModel model(topo, params, cfg);
  NomaPoint x;
  x.t.assign(at.t.begin(), at.t.begin() + static_cast<std::ptrdiff_t>(topo.n_gateways));
  x.q = at.q;
  x.tau.assign(at.t.begin() + static_cast<std::ptrdiff_t>(topo.n_gateways), at.t.end());
  return model.build(model.variables(true, true, free_relay_times), x, sets);
}

IpctaResult solve(Strategy strategy, const NetworkTopology& topo, const SystemParams& params,
                  const SolverConfig& cfg) {
  return strategy == Strategy::Noma ? ipcta_noma(topo, params, cfg) : ipcta_tdma(topo, params, cfg);
}

}  // namespace m2m
