#include "m2m/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "m2m/error.hpp"
#include "m2m/ipcta.hpp"
#include "m2m/noma_analytic.hpp"

namespace m2m {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Trend expected_trend(SweepParam p) {
  switch (p) {
    case SweepParam::CircuitDevice:
    case SweepParam::Payload: return Trend::NonDecreasing;
    default: return Trend::NonIncreasing;
  }
}

}  // namespace

SweepParam parse_sweep_param(std::string_view name) {
  if (name == "circuit_device_w" || name == "PC") return SweepParam::CircuitDevice;
  if (name == "max_power_gateway_w" || name == "Q") return SweepParam::GatewayPower;
  if (name == "max_power_device_w" || name == "P") return SweepParam::DevicePower;
  if (name == "payload_bits" || name == "D") return SweepParam::Payload;
  if (name == "deadline_s" || name == "T") return SweepParam::Deadline;
  fail(ErrorKind::Config, "unknown sweep parameter '" + std::string(name) + "'");
}

std::string_view to_string(SweepParam p) {
  switch (p) {
    case SweepParam::CircuitDevice: return "circuit_device_w";
    case SweepParam::GatewayPower: return "max_power_gateway_w";
    case SweepParam::DevicePower: return "max_power_device_w";
    case SweepParam::Payload: return "payload_bits";
    case SweepParam::Deadline: return "deadline_s";
  }
  return "?";
}

Dimension dimension(SweepParam p) {
  switch (p) {
    case SweepParam::Payload: return Dimension::Bits;
    case SweepParam::Deadline: return Dimension::Time;
    default: return Dimension::Power;
  }
}

Scenario with_value(Scenario s, SweepParam p, double value) {
  switch (p) {
    case SweepParam::CircuitDevice: s.params.circuit_device_w = value; break;
    case SweepParam::GatewayPower: s.max_power_gateway_w = value; break;
    case SweepParam::DevicePower: s.max_power_device_w = value; break;
    case SweepParam::Payload: s.payload_bits = value; break;
    case SweepParam::Deadline: s.params.deadline_s = value; break;
  }
  return s;
}

std::uint64_t SweepSpec::seed_of(int replication) const {
  return base.seed + static_cast<std::uint64_t>(replication);
}

void SweepSpec::validate() const {
  if (grid.empty()) fail(ErrorKind::Config, "sweep grid is empty");
  for (std::size_t g = 1; g < grid.size(); ++g)
    if (!(grid[g] > grid[g - 1])) fail(ErrorKind::Config, "sweep grid must be strictly increasing");
  if (replications < 1) fail(ErrorKind::Config, "sweep needs at least one replication");
  if (strategies.empty()) fail(ErrorKind::Config, "sweep needs at least one strategy");
  for (double v : grid) with_value(base, param, v).validate();
}

SweepRow run_row(const SweepSpec& spec, std::size_t grid_index, int replication, Strategy strategy,
                 const SweepOptions& opts) {
  SweepRow row;
  row.param_value = spec.grid[grid_index];
  row.replication = replication;
  row.seed = spec.seed_of(replication);
  row.strategy = strategy;
  row.energy_j = kNaN;
  const auto start = std::chrono::steady_clock::now();
  try {
    Scenario s = with_value(spec.base, spec.param, row.param_value);
    s.seed = row.seed;
    const auto topo = s.topology();
    const auto params = s.system();
    SolverConfig cfg;
    cfg.seed = row.seed;
    if (opts.timeout_s > 0)
      cfg.deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                 std::chrono::duration<double>(opts.timeout_s));
    const auto r = solve(strategy, topo, params, cfg);
    row.iterations = static_cast<int>(r.trace.objective.size()) - 1;
    row.feasible = r.verification.feasible;
    if (row.feasible)
      row.energy_j = r.report.total_j;
    else
      row.error = "verification failed";
  } catch (const Error& e) {
    row.error = std::string(to_string(e.kind())) + ": " + e.what();
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  if (opts.record_wallclock)
    row.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec, const SweepOptions& opts) {
  spec.validate();
  struct Job {
    std::size_t grid;
    int rep;
    Strategy strategy;
  };
  std::vector<Job> jobs;
  for (std::size_t g = 0; g < spec.grid.size(); ++g)
    for (int r = 0; r < spec.replications; ++r)
      for (Strategy s : spec.strategies) jobs.push_back({g, r, s});

  std::vector<SweepRow> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++)
      rows[k] = run_row(spec, jobs[k].grid, jobs[k].rep, jobs[k].strategy, opts);
  };
  unsigned n = opts.workers > 0 ? static_cast<unsigned>(opts.workers)
                                : std::max(1u, std::thread::hardware_concurrency());
  n = std::min<unsigned>(n, static_cast<unsigned>(jobs.size()));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

std::vector<AggregateRow> aggregate(const std::vector<SweepRow>& rows) {
  std::map<std::pair<double, int>, AggregateRow> acc;
  std::map<std::pair<double, int>, std::vector<double>> values;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.param_value, static_cast<int>(r.strategy));
    auto& a = acc[key];
    a.param_value = r.param_value;
    a.strategy = r.strategy;
    ++a.rows;
    if (r.feasible) {
      ++a.feasible;
      values[key].push_back(r.energy_j);
    }
  }
  std::vector<AggregateRow> out;
  for (auto& [key, a] : acc) {
    const auto& v = values[key];
    if (v.empty()) {
      a.mean_j = a.std_j = kNaN;
    } else {
      double sum = 0.0;
      for (double x : v) sum += x;
      a.mean_j = sum / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - a.mean_j) * (x - a.mean_j);
      a.std_j = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    }
    out.push_back(a);
  }
  return out;
}

std::string rows_csv(const std::vector<SweepRow>& rows) {
  std::string out = "param_value,replication,seed,strategy,E_Tot_J,iterations,feasible_flag,wallclock_s\n";
  for (const auto& r : rows) {
    out += fmt(r.param_value) + "," + std::to_string(r.replication) + "," + std::to_string(r.seed) + "," +
           std::string(to_string(r.strategy)) + "," + fmt(r.energy_j) + "," +
           std::to_string(r.iterations) + "," + (r.feasible ? "1" : "0") + "," + fmt(r.wallclock_s) + "\n";
  }
  return out;
}

std::string aggregate_csv(const std::vector<AggregateRow>& agg) {
  std::string out = "param_value,strategy,rows,feasible,mean_E_Tot_J,std_E_Tot_J\n";
  for (const auto& a : agg)
    out += fmt(a.param_value) + "," + std::string(to_string(a.strategy)) + "," + std::to_string(a.rows) +
           "," + std::to_string(a.feasible) + "," + fmt(a.mean_j) + "," + fmt(a.std_j) + "\n";
  return out;
}

std::vector<SweepRow> parse_rows_csv(std::string_view text) {
  std::vector<SweepRow> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  std::getline(in, line);
  if (line.rfind("param_value,", 0) != 0) fail(ErrorKind::Parse, "rows CSV: missing header");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 8) fail(ErrorKind::Parse, "rows CSV line " + std::to_string(lineno) + ": expected 8 fields");
    try {
      SweepRow r;
      r.param_value = std::stod(f[0]);
      r.replication = std::stoi(f[1]);
      r.seed = std::stoull(f[2]);
      r.strategy = parse_strategy(f[3]);
      r.energy_j = f[4] == "nan" ? kNaN : std::stod(f[4]);
      r.iterations = std::stoi(f[5]);
      r.feasible = f[6] == "1";
      r.wallclock_s = std::stod(f[7]);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      fail(ErrorKind::Parse, "rows CSV line " + std::to_string(lineno) + ": bad number");
    }
  }
  return rows;
}

double binomial_half_cdf(int k, int n) {
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  // log C(n, i) - n log 2, summed in a stable way
  double total = 0.0;
  for (int i = 0; i <= k; ++i)
    total += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) -
                      n * std::log(2.0));
  return std::min(1.0, total);
}

TrendTest trend_test(const std::vector<SweepRow>& rows, Strategy strategy, Trend trend, double alpha,
                     double rel_tol) {
  std::map<double, std::map<int, double>> by_value;
  for (const auto& r : rows)
    if (r.strategy == strategy && r.feasible) by_value[r.param_value][r.replication] = r.energy_j;
  std::vector<double> grid;
  for (const auto& [v, m] : by_value) grid.push_back(v);

  TrendTest t;
  t.trend = trend;
  t.strategy = strategy;
  t.pass = grid.size() >= 2;
  t.means_monotone = true;
  const double sign = trend == Trend::NonIncreasing ? 1.0 : -1.0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    const auto& lo = by_value[grid[g - 1]];
    const auto& hi = by_value[grid[g]];
    int n = 0, bad = 0;
    double sum_lo = 0.0, sum_hi = 0.0;
    for (const auto& [rep, e0] : lo) {
      const auto it = hi.find(rep);
      if (it == hi.end()) continue;
      ++n;
      sum_lo += e0;
      sum_hi += it->second;
      if (sign * (it->second - e0) > rel_tol * std::abs(e0)) ++bad;
    }
    const double p = n > 0 ? binomial_half_cdf(bad, n) : 1.0;
    t.pairs.push_back(n);
    t.violations.push_back(bad);
    t.p_values.push_back(p);
    if (!(p < alpha)) t.pass = false;
    if (n > 0 && sign * (sum_hi - sum_lo) / n > 0.0) t.means_monotone = false;
  }
  return t;
}

std::optional<double> crossover(const std::vector<AggregateRow>& agg) {
  std::map<double, double> noma, tdma;
  for (const auto& a : agg) (a.strategy == Strategy::Noma ? noma : tdma)[a.param_value] = a.mean_j;
  std::vector<std::pair<double, double>> diff;
  for (const auto& [v, m] : noma)
    if (tdma.count(v) && std::isfinite(m) && std::isfinite(tdma[v])) diff.emplace_back(v, m - tdma[v]);
  for (std::size_t k = 1; k < diff.size(); ++k) {
    const auto [x0, d0] = diff[k - 1];
    const auto [x1, d1] = diff[k];
    if (d0 == 0.0) return x0;
    if ((d0 < 0.0) != (d1 < 0.0) || d1 == 0.0) return x0 + (x1 - x0) * d0 / (d0 - d1);
  }
  return std::nullopt;
}

std::string sweep_summary(const SweepSpec& spec, const std::vector<SweepRow>& rows) {
  const auto agg = aggregate(rows);
  json points = json::array();
  for (const auto& a : agg)
    points.push_back({{"param_value", a.param_value},
                      {"strategy", std::string(to_string(a.strategy))},
                      {"rows", a.rows},
                      {"feasible", a.feasible},
                      {"mean_E_Tot_J", std::isfinite(a.mean_j) ? json(a.mean_j) : json(nullptr)},
                      {"std_E_Tot_J", std::isfinite(a.std_j) ? json(a.std_j) : json(nullptr)}});
  json trends = json::array();
  const Trend trend = expected_trend(spec.param);
  for (Strategy s : spec.strategies) {
    const auto t = trend_test(rows, s, trend);
    trends.push_back({{"strategy", std::string(to_string(s))},
                      {"trend", trend == Trend::NonIncreasing ? "non_increasing" : "non_decreasing"},
                      {"pairs", t.pairs},
                      {"violations", t.violations},
                      {"p_values", t.p_values},
                      {"means_monotone", t.means_monotone},
                      {"pass", t.pass}});
  }
  const auto x = crossover(agg);
  json j{{"param", std::string(to_string(spec.param))},
         {"grid", spec.grid},
         {"replications", spec.replications},
         {"base_seed", spec.base.seed},
         {"base_scenario", json::parse(dump_scenario(spec.base))},
         {"points", points},
         {"trend_tests", trends},
         {"crossover", x ? json(*x) : json(nullptr)}};
  return j.dump(2);
}

std::vector<CurvePoint> device_energy_curve(const Scenario& s, const std::vector<double>& circuit_w,
                                            int points) {
  if (points < 2) fail(ErrorKind::Config, "curve needs at least two points");
  const auto topo = s.topology();
  std::size_t gw = 0;
  while (gw < topo.n_gateways && topo.groups[gw].empty()) ++gw;
  if (gw == topo.n_gateways) fail(ErrorKind::Config, "topology has no devices");
  // Common time axis: a quarter of the smallest finite optimum, kept clear
  // of exponent overflow.
  const SystemParams base = s.system();
  const auto g = GroupTimeProfile::build(topo, base, gw);
  double lo = 1e-3 * base.deadline_s;
  for (double pc : circuit_w) {
    if (!(pc > 0.0)) continue;
    SystemParams p = base;
    p.circuit_device_w = pc;
    lo = std::min(lo, 0.25 * optimal_device_time(g, 0, p));
  }
  lo = std::max(lo, g.total_exponent() / 500.0);
  const double hi = base.deadline_s;
  std::vector<CurvePoint> out;
  for (double pc : circuit_w) {
    SystemParams p = base;
    p.circuit_device_w = pc;
    for (int k = 0; k < points; ++k) {
      const double t = lo * std::pow(hi / lo, static_cast<double>(k) / (points - 1));
      out.push_back({pc, t, device_energy(g, 0, t, p)});
    }
  }
  return out;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "circuit_device_w,t_s,E_11_J\n";
  for (const auto& c : curve) out += fmt(c.circuit_w) + "," + fmt(c.t_s) + "," + fmt(c.energy_j) + "\n";
  return out;
}

bool is_decreasing(const std::vector<double>& v) {
  for (std::size_t k = 1; k < v.size(); ++k)
    if (!(v[k] < v[k - 1])) return false;
  return v.size() >= 2;
}

bool is_u_shaped(const std::vector<double>& v) {
  if (v.size() < 3) return false;
  const auto m = static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
  if (m == 0 || m + 1 == v.size()) return false;
  for (std::size_t k = 1; k <= m; ++k)
    if (!(v[k] < v[k - 1])) return false;
  for (std::size_t k = m + 1; k < v.size(); ++k)
    if (!(v[k] > v[k - 1])) return false;
  return true;
}

}  // namespace m2m
