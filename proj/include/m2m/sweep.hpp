#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "m2m/energy.hpp"
#include "m2m/scenario.hpp"

namespace m2m {

enum class SweepParam { CircuitDevice, GatewayPower, DevicePower, Payload, Deadline };

/// Accepts the scenario key ("circuit_device_w", ...) or the short symbol
/// ("PC", "Q", "P", "D", "T").
SweepParam parse_sweep_param(std::string_view name);
std::string_view to_string(SweepParam p);
Dimension dimension(SweepParam p);

/// Scenario with the swept quantity replaced.
Scenario with_value(Scenario base, SweepParam p, double value);

struct SweepSpec {
  SweepParam param = SweepParam::CircuitDevice;
  std::vector<double> grid;  // SI, strictly increasing
  int replications = 50;
  Scenario base;
  std::vector<Strategy> strategies{Strategy::Noma, Strategy::Tdma};

  /// Replication r uses topology seed base.seed + r at every grid point and
  /// for every strategy, so comparisons are paired.
  std::uint64_t seed_of(int replication) const;
  void validate() const;
};

struct SweepOptions {
  int workers = 0;           // 0: hardware concurrency
  double timeout_s = 120.0;  // per row
  bool record_wallclock = true;
};

struct SweepRow {
  double param_value = 0.0;
  int replication = 0;
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::Noma;
  double energy_j = 0.0;  // NaN when the row failed
  int iterations = 0;
  bool feasible = false;
  double wallclock_s = 0.0;
  std::string error;
};

/// Runs every (grid point, replication, strategy) row on a worker pool.
/// Failures (infeasible, timeout, numeric) are recorded in the row. Rows
/// come back in grid, replication, strategy order.
std::vector<SweepRow> run_sweep(const SweepSpec& spec, const SweepOptions& opts = {});

/// Solves one row; never throws for solver failures.
SweepRow run_row(const SweepSpec& spec, std::size_t grid_index, int replication, Strategy strategy,
                 const SweepOptions& opts);

struct AggregateRow {
  double param_value = 0.0;
  Strategy strategy = Strategy::Noma;
  int rows = 0;
  int feasible = 0;
  double mean_j = 0.0;  // over feasible rows
  double std_j = 0.0;   // sample standard deviation
};

std::vector<AggregateRow> aggregate(const std::vector<SweepRow>& rows);

std::string rows_csv(const std::vector<SweepRow>& rows);
std::string aggregate_csv(const std::vector<AggregateRow>& agg);
std::vector<SweepRow> parse_rows_csv(std::string_view text);

enum class Trend { NonIncreasing, NonDecreasing };

/// One-sided sign test per adjacent grid pair, paired by replication over
/// rows feasible at both points. A violation is a step against the trend by
/// more than rel_tol; ties count as agreeing. Each pair must reject
/// "violations occur at least half the time" at level alpha.
struct TrendTest {
  Trend trend = Trend::NonIncreasing;
  Strategy strategy = Strategy::Noma;
  std::vector<int> pairs;       // usable pairs per adjacent step
  std::vector<int> violations;  // per adjacent step
  std::vector<double> p_values;
  bool means_monotone = false;
  bool pass = false;
};

TrendTest trend_test(const std::vector<SweepRow>& rows, Strategy strategy, Trend trend,
                     double alpha = 0.05, double rel_tol = 1e-6);

/// P(Binomial(n, 1/2) <= k).
double binomial_half_cdf(int k, int n);

/// Where mean NOMA minus mean TDMA changes sign, by linear interpolation
/// between grid points. Empty when it never does.
std::optional<double> crossover(const std::vector<AggregateRow>& agg);

/// Summary JSON: spec, aggregates, crossover, trend tests.
std::string sweep_summary(const SweepSpec& spec, const std::vector<SweepRow>& rows);

struct CurvePoint {
  double circuit_w = 0.0;
  double t_s = 0.0;
  double energy_j = 0.0;
};

/// E_ij(t) of the first device of the first nonempty group for each
/// circuit power, on one log grid from a quarter of the smallest finite
/// optimum up to the deadline. Power caps are ignored here.
std::vector<CurvePoint> device_energy_curve(const Scenario& s, const std::vector<double>& circuit_w,
                                            int points = 200);
std::string curve_csv(const std::vector<CurvePoint>& curve);

/// Strictly decreasing then strictly increasing with an interior minimum.
bool is_u_shaped(const std::vector<double>& values);
bool is_decreasing(const std::vector<double>& values);

}  // namespace m2m
