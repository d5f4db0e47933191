#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "m2m/energy.hpp"
#include "m2m/harvest_sets.hpp"
#include "m2m/opt.hpp"

namespace m2m {

struct SolveTrace {
  Strategy strategy = Strategy::Noma;
  std::vector<double> objective;       // U^(v), v = 0 is the start point
  std::vector<double> energy;          // gated E_Tot at each iterate
  std::vector<std::size_t> segment;    // harvest-set segment of each entry
  std::vector<HarvestSets> sets;       // sets used for each entry
  std::vector<int> inner_blocks;       // NOMA block iterations per outer step
  std::vector<double> worst_residual;
  std::string termination;
  std::size_t best_index = 0;          // entry returned as the solution
  bool start_repaired = false;         // seed broke the deadline and was repaired
  int newton_iters = 0;
  int lp_pivots = 0;
};

struct ViolationReport {
  std::vector<std::pair<std::string, double>> families;
  double tol = 1e-6;
  double worst = 0.0;
  bool feasible = false;
};

struct IpctaResult {
  Allocation allocation;
  EnergyReport report;
  ViolationReport verification;
  SolveTrace trace;
  HarvestSets sets;
};

/// NOMA harvest sets: cluster k is in S_j iff the cluster's received power at
/// device j exceeds P0. TDMA: gateway n is in S_j iff h_nj q_n > P0.
HarvestSets update_harvest_sets(Strategy strategy, const std::vector<double>& gateway_power,
                                const NetworkTopology& topo, double threshold_w);

/// Starting sets: the device's own cluster (NOMA) or own gateway (TDMA); if
/// that cannot reach P0 at full power, every phase that can. Throws
/// Infeasible for a device no phase can power.
HarvestSets initial_harvest_sets(Strategy strategy, const NetworkTopology& topo,
                                 const SystemParams& params);

/// Objective of the smoothed NOMA problem for fixed sets: device energies,
/// relay consumption, minus ubar-harvest over the sets.
double noma_set_objective(const NetworkTopology& topo, const SystemParams& params,
                          const HarvestSets& sets, const std::vector<double>& q,
                          const std::vector<double>& t);

/// Smoothed NOMA program for fixed sets. Variables in order: device-phase
/// times of nonempty groups, gateway powers, then relay-phase times when
/// `free_relay_times`; otherwise those are fixed at the values in `at`.
ConvexProblem build_noma_problem(const NetworkTopology& topo, const SystemParams& params,
                                 const HarvestSets& sets, const Allocation& at,
                                 bool free_relay_times = true, const SolverConfig& cfg = {});

/// Per-family worst residual of an allocation, checked against `tol`.
ViolationReport verify_solution(const NetworkTopology& topo, const SystemParams& params,
                                const Allocation& alloc, double tol = 1e-6);

/// Alternating power control and time allocation for NOMA.
IpctaResult ipcta_noma(const NetworkTopology& topo, const SystemParams& params,
                       const SolverConfig& cfg = {});

/// Iterative convex solves of the transformed TDMA problem.
IpctaResult ipcta_tdma(const NetworkTopology& topo, const SystemParams& params,
                       const SolverConfig& cfg = {});

IpctaResult solve(Strategy strategy, const NetworkTopology& topo, const SystemParams& params,
                  const SolverConfig& cfg = {});

}  // namespace m2m
