#pragma once

#include <cstddef>
#include <vector>

#include "m2m/energy.hpp"
#include "m2m/opt.hpp"
#include "m2m/params.hpp"
#include "m2m/topology.hpp"

namespace m2m {

/// Exponent constants of one device group in SIC order.
///
/// a[l] = ln2 D_l / B and b(j, l) = ln2 (D_{j+1} + ... + D_{l-1}) / B, both in
/// seconds, so that the transmit powers depend on t only through e^{a/t}.
struct GroupTimeProfile {
  std::size_t gateway = 0;
  std::vector<std::size_t> devices;
  std::vector<double> gains;
  std::vector<double> a;
  std::vector<double> prefix;  // prefix[l] = a[0] + ... + a[l-1]

  static GroupTimeProfile build(const NetworkTopology& topo, const SystemParams& params,
                                std::size_t gateway);
  /// Profile for an explicit SIC-ordered group.
  static GroupTimeProfile from_parts(std::vector<double> gains, const std::vector<double>& payload_bits,
                                     double bandwidth_hz);

  std::size_t size() const { return a.size(); }
  bool empty() const { return a.empty(); }
  double b(std::size_t j, std::size_t l) const;
  double total_exponent() const { return prefix.empty() ? 0.0 : prefix.back(); }
};

inline constexpr double kDefaultExponentCap = 700.0;

/// Minimal powers meeting every payload in time t (SIC order). Throws
/// Domain for t <= 0 and InfeasibleTime when an exponent passes the cap.
std::vector<double> closed_form_powers(const GroupTimeProfile& g, double t, double noise_w,
                                       double exponent_cap = kDefaultExponentCap);

/// E_ij(t) = t (p_j(t)/eta + P^C) for the device at SIC position `pos`.
double device_energy(const GroupTimeProfile& g, std::size_t pos, double t,
                     const SystemParams& params, double exponent_cap = kDefaultExponentCap);
double device_energy_derivative(const GroupTimeProfile& g, std::size_t pos, double t,
                                const SystemParams& params,
                                double exponent_cap = kDefaultExponentCap);
double group_energy(const GroupTimeProfile& g, double t, const SystemParams& params,
                    double exponent_cap = kDefaultExponentCap);
double group_energy_derivative(const GroupTimeProfile& g, double t, const SystemParams& params,
                               double exponent_cap = kDefaultExponentCap);

/// Minimiser T_ij* of E_ij. Throws Unbounded when P^C = 0.
double optimal_device_time(const GroupTimeProfile& g, std::size_t pos, const SystemParams& params,
                           double tol = 1e-10, double exponent_cap = kDefaultExponentCap);
/// Minimiser T_i* of the group energy sum.
double optimal_group_time(const GroupTimeProfile& g, const SystemParams& params, double tol = 1e-10,
                          double exponent_cap = kDefaultExponentCap);
/// Smallest t at which every closed-form power respects its cap.
double min_feasible_group_time(const GroupTimeProfile& g, const SystemParams& params,
                               double exponent_cap = kDefaultExponentCap);

struct SeedSolution {
  Allocation allocation;
  std::vector<double> phase_energy_j;  // relay-phase energies at the seed
  double lp_objective = 0.0;
  int lp_pivots = 0;
};

/// Group times at T_i* (raised to the power-cap minimum where needed),
/// gateway powers at their caps, and relay-phase times from a linear program
/// minimising relay energy under gateway throughput and device causality.
/// The deadline is not enforced. Throws Infeasible when the LP has no point.
SeedSolution feasible_seed_noma(const NetworkTopology& topo, const SystemParams& params,
                                const SolverConfig& cfg = {});

struct UpperTimeBound {
  std::size_t alpha = 0;
  std::vector<double> beta;
  std::vector<double> device_times;  // T_ij*, indexed by device
  std::vector<double> group_times;   // T_i*, indexed by gateway (0 for empty groups)
  SeedSolution seed;
  double sum_seed_time = 0.0;
  double t_amp = 0.0;
  double t_upp = 0.0;
};

/// Deadline beyond which using the whole period is provably suboptimal.
UpperTimeBound t_upp(const NetworkTopology& topo, const SystemParams& params,
                     const SolverConfig& cfg = {});

/// max over gateways of min over their devices of T_ij*.
double max_min_device_time(const UpperTimeBound& bound, const NetworkTopology& topo);

}  // namespace m2m
