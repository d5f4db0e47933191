#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "m2m/params.hpp"
#include "m2m/topology.hpp"

namespace m2m {

enum class Strategy { Noma, Tdma };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

/// Powers and phase times of one transmission period.
///
/// NOMA phases: t[i] is gateway i's device phase (i < N), t[N + k] is cluster
/// k's relay phase. TDMA phases: t[j] is device j's slot (j < M), t[M + i] is
/// gateway i's slot.
struct Allocation {
  Strategy strategy = Strategy::Noma;
  std::vector<double> p;
  std::vector<double> q;
  std::vector<double> t;

  static Allocation zeros(Strategy strategy, const NetworkTopology& topo);
  /// Time during which `device` transmits.
  double device_time(const NetworkTopology& topo, std::size_t device) const;
  double total_time() const;
};

/// Signed worst-case residual per constraint family; positive means violated.
/// Rates, powers and the time budget are relative; causality is relative to
/// the device's consumption; nonnegativity is absolute.
struct ConstraintResiduals {
  double device_rate = 0.0;
  double gateway_rate = 0.0;
  double causality = 0.0;
  double time_budget = 0.0;
  double device_power = 0.0;
  double gateway_power = 0.0;
  double nonnegativity = 0.0;

  double worst() const;
};

struct EnergyReport {
  Strategy strategy = Strategy::Noma;
  double total_j = 0.0;
  std::vector<double> device_consumed_j;
  std::vector<double> device_harvested_j;
  std::vector<double> device_rate_bits;
  std::vector<double> gateway_rate_bits;
  /// Energy per phase in the same layout as Allocation::t.
  std::vector<double> phase_energy_j;
  /// min over relay phases of (radiated power - total harvested power).
  double conservation_margin_w = 0.0;
  ConstraintResiduals residuals;
};

/// Bits each gateway forwards: the sum of its devices' payloads.
std::vector<double> gateway_payloads(const NetworkTopology& topo, const SystemParams& params);

/// Evaluates total energy, per-device and per-phase terms, and residuals of
/// every constraint using the gated harvester.
EnergyReport total_energy(const NetworkTopology& topo, const SystemParams& params,
                          const Allocation& alloc);

}  // namespace m2m
