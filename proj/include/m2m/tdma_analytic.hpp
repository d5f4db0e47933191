#pragma once

#include <cstddef>
#include <vector>

#include "m2m/energy.hpp"
#include "m2m/harvest_sets.hpp"
#include "m2m/noma_analytic.hpp"
#include "m2m/opt.hpp"

namespace m2m {

/// Minimal power sending `bits` over a clean link of gain `gain` in time t.
double tdma_power(double t, double bits, double gain, const SystemParams& params,
                  double exponent_cap = kDefaultExponentCap);
double tdma_device_energy(double t, double bits, double gain, const SystemParams& params,
                          double exponent_cap = kDefaultExponentCap);
double tdma_device_energy_derivative(double t, double bits, double gain, const SystemParams& params,
                                     double exponent_cap = kDefaultExponentCap);
/// Minimiser of tdma_device_energy. Throws Unbounded when P^C = 0.
double tdma_optimal_time(double bits, double gain, const SystemParams& params, double tol = 1e-10,
                         double exponent_cap = kDefaultExponentCap);
/// Shortest slot in which `bits` fit at power `max_power_w`.
double tdma_min_time(double bits, double gain, double max_power_w, const SystemParams& params);

/// Energy-scaled variables: p_hat = t p and q_hat = t q, with the M + N slot
/// times in Allocation order.
struct TransformedAllocation {
  std::vector<double> p_hat;
  std::vector<double> q_hat;
  std::vector<double> t;
};

/// Index map of the transformed variables inside the solver vector.
struct TdmaLayout {
  std::size_t n_devices = 0;
  std::size_t n_gateways = 0;

  int p_hat(std::size_t j) const { return static_cast<int>(j); }
  int q_hat(std::size_t i) const { return static_cast<int>(n_devices + i); }
  int t_device(std::size_t j) const { return static_cast<int>(n_devices + n_gateways + j); }
  int t_gateway(std::size_t i) const { return static_cast<int>(2 * n_devices + n_gateways + i); }
  int dim() const { return static_cast<int>(2 * (n_devices + n_gateways)); }

  Eigen::VectorXd pack(const TransformedAllocation& v) const;
  TransformedAllocation unpack(const Eigen::VectorXd& x) const;
};

struct TdmaProblem {
  ConvexProblem problem;
  TdmaLayout layout;
  double time_floor = 1e-9;
  double threshold_margin = 1e-9;
};

/// Convex program over (p_hat, q_hat, t) for fixed harvest sets (gateway
/// indices per device). Harvest terms use the perspective t ubar(h q_hat / t).
TdmaProblem build_tdma_convex_problem(const NetworkTopology& topo, const SystemParams& params,
                                      const HarvestSets& sets, double time_floor = 1e-9);

/// Energy of the transformed program at a point (its objective value).
double tdma_transformed_objective(const NetworkTopology& topo, const SystemParams& params,
                                  const HarvestSets& sets, const TransformedAllocation& v);

TransformedAllocation transform_allocation(const Allocation& alloc);

/// Divides the energy variables by their slot times. Zero slots must carry
/// zero energy; otherwise throws Inconsistent. Power caps are re-checked with
/// `cap_tol` relative slack (excess within it is clipped).
Allocation recover_allocation(const TransformedAllocation& v, const SystemParams& params,
                              double cap_tol = 1e-9);

}  // namespace m2m
