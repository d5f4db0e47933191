#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "m2m/error.hpp"
#include "m2m/io.hpp"
#include "m2m/scenario.hpp"
#include "m2m/sweep.hpp"
#include "test_util.hpp"

using namespace m2m;

#ifndef M2M_TEST_DATA_DIR
#define M2M_TEST_DATA_DIR "tests/golden"
#endif

namespace {

std::string read_file(const std::string& name) {
  std::ifstream in(std::string(M2M_TEST_DATA_DIR) + "/" + name, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "missing golden file " << name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::Numeric;
}

std::vector<SweepRow> synthetic_rows() {
  std::vector<SweepRow> rows;
  const double energy[2][3] = {{4.25, 4.5, 4.75}, {2.5, 2.625, std::nan("")}};
  for (int g = 0; g < 2; ++g)
    for (int r = 0; r < 3; ++r)
      for (Strategy s : {Strategy::Noma, Strategy::Tdma}) {
        SweepRow row;
        row.param_value = g == 0 ? 5e-4 : 1e-2;
        row.replication = r;
        row.seed = 100 + static_cast<std::uint64_t>(r);
        row.strategy = s;
        row.energy_j = s == Strategy::Noma ? energy[g][r] : energy[g][r] / 2.0;
        row.feasible = std::isfinite(row.energy_j);
        row.iterations = row.feasible ? 2 + r : 0;
        row.wallclock_s = 0.125 * (r + 1);
        rows.push_back(row);
      }
  return rows;
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("quantities and units") {
  CHECK(parse_quantity("5 mW", Dimension::Power) == doctest::Approx(5e-3).epsilon(1e-15));
  CHECK(parse_quantity("-104 dBm", Dimension::Power) == doctest::Approx(dbm_to_watts(-104.0)).epsilon(1e-15));
  CHECK(parse_quantity("18kHz", Dimension::Frequency) == doctest::Approx(18e3));
  CHECK(parse_quantity("10 kbit", Dimension::Bits) == doctest::Approx(1e4));
  CHECK(parse_quantity("300 m", Dimension::Distance) == doctest::Approx(0.3));
  CHECK(parse_quantity("250 ms", Dimension::Time) == doctest::Approx(0.25));
  CHECK(parse_quantity("2.5", Dimension::Power) == 2.5);
  CHECK(parse_quantity("1500 1/W", Dimension::InversePower) == 1500.0);
  CHECK(kind_of([] { parse_quantity("1.5 mW", Dimension::InversePower); }) == ErrorKind::Parse);
  try {
    parse_quantity("5 kHz", Dimension::Power, "circuit_device_w");
    FAIL("expected a unit error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(std::string(e.what()).find("circuit_device_w") != std::string::npos);
  }
  CHECK(kind_of([] { parse_quantity("five", Dimension::Power); }) == ErrorKind::Parse);
}

TEST_CASE("scenario parsing") {
  const auto s = parse_scenario(R"({
    // device side
    "circuit_device_w": "2 mW",
    "payload_bits": "8 kbit",
    "noise_w": "-100 dBm",
    "deadline_s": 4,
    "seed": 9,
    "geometry": {"gateway_ring_km": "250 m", "shadowing_std_db": 0}
  })");
  CHECK(s.params.circuit_device_w == doctest::Approx(2e-3));
  CHECK(s.payload_bits == doctest::Approx(8e3));
  CHECK(s.params.noise_w == doctest::Approx(1e-13));
  CHECK(s.params.deadline_s == 4.0);
  CHECK(s.seed == 9);
  CHECK(s.geometry.gateway_ring_km == doctest::Approx(0.25));
  CHECK(s.geometry.shadowing_std_db == 0.0);
  const auto params = s.system();
  CHECK(params.payload_bits.size() == 40);
  CHECK(params.max_power_gateway_w.size() == 12);

  const auto defaults = parse_scenario("{}");
  CHECK(defaults.params.bandwidth_hz == 18e3);
  CHECK(defaults.params.circuit_gateway_w == 0.5);
  CHECK(defaults.params.eh.threshold_w == 1e-4);
  CHECK(defaults.max_power_device_w == 5e-3);

  const auto again = parse_scenario(dump_scenario(s));
  CHECK(dump_scenario(again) == dump_scenario(s));

  try {
    parse_scenario("{\n  \"deadline_s\": 5,\n  \"seed\": ,\n}", "bad.json");
    FAIL("expected a syntax error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(std::string(e.what()).find("bad.json:3:") != std::string::npos);
  }
  CHECK(kind_of([] { parse_scenario(R"({"deadline": 5})"); }) == ErrorKind::Parse);
  CHECK(kind_of([] { parse_scenario(R"({"geometry": {"radius": 1}})"); }) == ErrorKind::Parse);
  CHECK_THROWS_AS(parse_scenario(R"({"pa_eff_device": 1.5})").validate(), Error);
}

TEST_CASE("sweep parameters") {
  CHECK(parse_sweep_param("PC") == SweepParam::CircuitDevice);
  CHECK(parse_sweep_param("max_power_gateway_w") == SweepParam::GatewayPower);
  CHECK(parse_sweep_param("D") == SweepParam::Payload);
  CHECK_THROWS_AS(parse_sweep_param("X"), Error);
  Scenario base;
  CHECK(with_value(base, SweepParam::DevicePower, 2e-3).max_power_device_w == 2e-3);
  CHECK(with_value(base, SweepParam::Deadline, 3.0).params.deadline_s == 3.0);
  CHECK(with_value(base, SweepParam::CircuitDevice, 1e-3).params.circuit_device_w == 1e-3);

  SweepSpec spec;
  spec.base.seed = 40;
  spec.grid = {1e-3, 2e-3};
  CHECK(spec.seed_of(3) == 43);
  CHECK_NOTHROW(spec.validate());
  spec.grid = {2e-3, 1e-3};
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.grid = {};
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.grid = {1e-3};
  spec.replications = 0;
  CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("CSV schema golden files") {
  const auto rows = synthetic_rows();
  CHECK(rows_csv(rows) == read_file("rows.csv"));
  CHECK(aggregate_csv(aggregate(rows)) == read_file("aggregate.csv"));
  const auto back = parse_rows_csv(read_file("rows.csv"));
  CHECK(rows_csv(back) == read_file("rows.csv"));
  CHECK_THROWS_AS(parse_rows_csv("a,b\n"), Error);
}

TEST_CASE("small sweep is deterministic and recomputable") {
  SweepSpec spec;
  spec.param = SweepParam::DevicePower;
  spec.grid = {2e-3, 5e-3};
  spec.replications = 2;
  SweepOptions opts;
  opts.record_wallclock = false;
  opts.workers = 1;
  const auto rows = run_sweep(spec, opts);
  REQUIRE(rows.size() == 8);
  opts.workers = 4;
  const auto rows4 = run_sweep(spec, opts);
  CHECK(rows_csv(rows) == rows_csv(rows4));
  for (const auto& r : rows) {
    CHECK(r.feasible);
    CHECK(r.wallclock_s == 0.0);
    CHECK(r.seed == spec.seed_of(r.replication));
  }

  // Aggregates from the written CSV.
  const auto parsed = parse_rows_csv(rows_csv(rows));
  for (const auto& a : aggregate(rows)) {
    std::vector<double> v;
    for (const auto& r : parsed)
      if (r.param_value == a.param_value && r.strategy == a.strategy && r.feasible) v.push_back(r.energy_j);
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    CHECK(std::abs(a.mean_j - mean) <= 1e-12 * mean);
    CHECK(std::abs(a.std_j - std::sqrt(ss / static_cast<double>(v.size() - 1))) <= 1e-12 * mean);
  }

  const auto summary = nlohmann::json::parse(sweep_summary(spec, rows));
  CHECK(summary["param"] == "max_power_device_w");
  CHECK(summary["points"].size() == 4);
  CHECK(summary["trend_tests"].size() == 2);
}

TEST_CASE("failed rows stay in the sweep") {
  SweepSpec spec;
  spec.param = SweepParam::Payload;
  spec.grid = {1e4, 1e9};
  spec.replications = 1;
  spec.strategies = {Strategy::Tdma};
  SweepOptions opts;
  opts.record_wallclock = false;
  const auto rows = run_sweep(spec, opts);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].feasible);
  CHECK_FALSE(rows[1].feasible);
  CHECK(std::isnan(rows[1].energy_j));
  CHECK(rows[1].error.find("device_rate") != std::string::npos);
  CHECK(rows_csv(rows).find(",nan,") != std::string::npos);
}

TEST_CASE("binomial tail") {
  CHECK(binomial_half_cdf(0, 5) == doctest::Approx(1.0 / 32.0).epsilon(1e-14));
  CHECK(binomial_half_cdf(1, 5) == doctest::Approx(6.0 / 32.0).epsilon(1e-14));
  CHECK(binomial_half_cdf(5, 5) == 1.0);
  CHECK(binomial_half_cdf(-1, 5) == 0.0);
  double direct = 0.0, c = 1.0;
  for (int i = 0; i <= 20; ++i) {
    if (i > 0) c = c * (50 - i + 1) / i;
    direct += c;
  }
  CHECK(binomial_half_cdf(20, 50) == doctest::Approx(direct / std::pow(2.0, 50)).epsilon(1e-12));
}

TEST_CASE("trend and crossover") {
  std::vector<SweepRow> rows;
  for (int g = 0; g < 3; ++g)
    for (int r = 0; r < 20; ++r) {
      SweepRow row;
      row.param_value = g;
      row.replication = r;
      row.strategy = Strategy::Noma;
      row.energy_j = 10.0 - g - 0.01 * r;
      row.feasible = true;
      rows.push_back(row);
      row.strategy = Strategy::Tdma;
      row.energy_j = 5.0 + ((r + g) % 2 == 0 ? 0.1 : -0.1);
      rows.push_back(row);
    }
  const auto down = trend_test(rows, Strategy::Noma, Trend::NonIncreasing);
  CHECK(down.pass);
  CHECK(down.means_monotone);
  CHECK(down.violations == std::vector<int>{0, 0});
  CHECK_FALSE(trend_test(rows, Strategy::Noma, Trend::NonDecreasing).pass);
  CHECK_FALSE(trend_test(rows, Strategy::Tdma, Trend::NonIncreasing).pass);

  std::vector<AggregateRow> agg(4);
  agg[0] = {0.0, Strategy::Noma, 1, 1, 1.0, 0.0};
  agg[1] = {0.0, Strategy::Tdma, 1, 1, 2.0, 0.0};
  agg[2] = {10.0, Strategy::Noma, 1, 1, 3.0, 0.0};
  agg[3] = {10.0, Strategy::Tdma, 1, 1, 2.0, 0.0};
  REQUIRE(crossover(agg).has_value());
  CHECK(*crossover(agg) == doctest::Approx(5.0));
  agg[2].mean_j = 1.5;
  CHECK_FALSE(crossover(agg).has_value());
}

TEST_CASE("device energy curves") {
  Scenario s;
  const auto curve = device_energy_curve(s, {0.0, 5e-3, 1e-2}, 200);
  REQUIRE(curve.size() == 600);
  for (double pc : {0.0, 5e-3, 1e-2}) {
    std::vector<double> e;
    for (const auto& c : curve)
      if (c.circuit_w == pc) e.push_back(c.energy_j);
    REQUIRE(e.size() == 200);
    if (pc == 0.0)
      CHECK(is_decreasing(e));
    else
      CHECK(is_u_shaped(e));
  }
  CHECK(is_u_shaped({3, 2, 1, 2}));
  CHECK_FALSE(is_u_shaped({3, 2, 1}));
  CHECK_FALSE(is_u_shaped({1, 2, 3}));
  CHECK(curve_csv(curve).rfind("circuit_device_w,t_s,E_11_J\n", 0) == 0);
}

TEST_CASE("json round trip of an allocation") {
  Allocation a;
  a.strategy = Strategy::Tdma;
  a.p = {1e-3, 0.1 + 0.2};
  a.q = {0.7};
  a.t = {0.1, 0.2, 1.0 / 3.0};
  const auto back = allocation_from_json(nlohmann::json::parse(to_json(a).dump()));
  CHECK(back.strategy == a.strategy);
  CHECK(back.p == a.p);
  CHECK(back.q == a.q);
  CHECK(back.t == a.t);
  CHECK_THROWS_AS(allocation_from_json(nlohmann::json::object()), Error);
}

}
