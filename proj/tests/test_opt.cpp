#include <doctest.h>

#include <cmath>
#include <random>

#include "m2m/error.hpp"
#include "m2m/ipcta.hpp"
#include "m2m/noma_analytic.hpp"
#include "m2m/opt.hpp"
#include "m2m/tdma_analytic.hpp"
#include "test_util.hpp"

using namespace m2m;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Term square_term(int idx, double center, double weight) {
  Term t;
  t.support = {idx};
  t.eval = [center, weight](std::span<const double> x, std::span<double> g) {
    const double d = x[0] - center;
    if (!g.empty()) g[0] = 2.0 * weight * d;
    return weight * d * d;
  };
  return t;
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Every vertex of {x >= 0, A x <= b} in two dimensions; returns the best cost.
double enumerate_vertices(const VectorXd& c, const MatrixXd& a, const VectorXd& b) {
  std::vector<std::pair<VectorXd, double>> lines;  // n . x = r
  for (int r = 0; r < a.rows(); ++r) lines.push_back({a.row(r).transpose(), b[r]});
  lines.push_back({VectorXd::Unit(2, 0), 0.0});
  lines.push_back({VectorXd::Unit(2, 1), 0.0});
  double best = INFINITY;
  for (std::size_t i = 0; i < lines.size(); ++i)
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      Eigen::Matrix2d m;
      m.row(0) = lines[i].first.transpose();
      m.row(1) = lines[j].first.transpose();
      if (std::abs(m.determinant()) < 1e-14) continue;
      const Eigen::Vector2d x = m.inverse() * Eigen::Vector2d(lines[i].second, lines[j].second);
      if (x.minCoeff() < -1e-12) continue;
      if (((a * x - b).array() > 1e-12).any()) continue;
      best = std::min(best, c.dot(x));
    }
  return best;
}

VectorXd local(const Term& t, const VectorXd& x) {
  VectorXd v(static_cast<Eigen::Index>(t.support.size()));
  for (std::size_t k = 0; k < t.support.size(); ++k) v[static_cast<Eigen::Index>(k)] = x[t.support[k]];
  return v;
}

// Analytic gradient of one term against Richardson central differences.
double gradient_error(const Term& t, const VectorXd& x) {
  VectorXd xl = local(t, x);
  const auto n = xl.size();
  VectorXd g(n);
  const double f0 = t.eval({xl.data(), static_cast<std::size_t>(n)}, {g.data(), static_cast<std::size_t>(n)});
  if (!std::isfinite(f0)) return 0.0;
  double worst = 0.0, scale = 1e-12;
  VectorXd fd(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double h = 1e-5 * std::max(std::abs(xl[k]), 1e-3);
    auto f = [&](double s) {
      VectorXd y = xl;
      y[k] = s;
      return t.eval({y.data(), static_cast<std::size_t>(n)}, {});
    };
    fd[k] = test::derivative_fd(f, xl[k], h);
    scale = std::max(scale, std::abs(fd[k]));
  }
  for (Eigen::Index k = 0; k < n; ++k) worst = std::max(worst, std::abs(g[k] - fd[k]));
  return worst / scale;
}

void audit(const ConvexProblem& P, std::mt19937_64& rng, int points,
           const std::function<std::pair<double, double>(int)>& range) {
  int checked = 0;
  for (int rep = 0; rep < points; ++rep) {
    VectorXd x(P.dim);
    for (int i = 0; i < P.dim; ++i) {
      const auto [lo, hi] = range(i);
      x[i] = test::uniform(rng, lo, hi);
    }
    for (const auto* terms : {&P.objective, &P.constraints})
      for (const auto& t : *terms) {
        const double err = gradient_error(t, x);
        if (err > 1e-5) MESSAGE(t.label << " gradient error " << err);
        CHECK(err <= 1e-5);
        ++checked;
      }
  }
  CHECK(checked > 0);
}

}  // namespace

TEST_SUITE("opt") {

TEST_CASE("one-dimensional barrier problem") {
  ConvexProblem P(1);
  P.add_objective(square_term(0, 0.0, 1.0));
  P.add_constraint(ConvexProblem::linear_term({0}, {-1.0}, 1.0, "x >= 1"));
  const auto r = solve_convex(P, VectorXd::Constant(1, 3.0), SolverConfig{});
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.max_violation <= 1e-8);
  for (std::size_t k = 1; k < r.history.size(); ++k) CHECK(r.history[k] <= r.history[k - 1] + 1e-12);
  CHECK_THROWS_AS(solve_convex(P, VectorXd::Constant(1, 0.5), SolverConfig{}), Error);
}

TEST_CASE("two-dimensional QP against KKT") {
  // min (x-1)^2 + 2 (y-2)^2 s.t. x + y <= 1: multiplier 8/3.
  ConvexProblem P(2);
  P.add_objective(square_term(0, 1.0, 1.0));
  P.add_objective(square_term(1, 2.0, 2.0));
  P.add_constraint(ConvexProblem::linear_term({0, 1}, {1.0, 1.0}, -1.0));
  const auto r = solve_convex(P, VectorXd::Zero(2), SolverConfig{});
  CHECK(r.x[0] == doctest::Approx(-1.0 / 3.0).epsilon(1e-6));
  CHECK(r.x[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-6));
  CHECK(r.duals[0] == doctest::Approx(8.0 / 3.0).epsilon(1e-6));
  CHECK(r.gap <= 1e-8);
}

TEST_CASE("phase one") {
  ConvexProblem P(2);
  P.lower.setZero();
  P.upper.setConstant(10.0);
  P.add_constraint(ConvexProblem::linear_term({0, 1}, {-1.0, -1.0}, 3.0));
  const auto r = find_strictly_feasible(P, VectorXd::Zero(2), SolverConfig{});
  CHECK(r.feasible);
  CHECK(P.strictly_feasible(r.x));
  P.add_constraint(ConvexProblem::linear_term({0, 1}, {1.0, 1.0}, -2.0));
  CHECK_FALSE(find_strictly_feasible(P, VectorXd::Zero(2), SolverConfig{}).feasible);
}

TEST_CASE("simplex basics") {
  SolverConfig cfg;
  MatrixXd a(1, 1);
  a << 1.0;
  auto r = solve_lp(LinearProgram::nonnegative(VectorXd::Constant(1, -1.0), a, VectorXd::Constant(1, 3.0)), cfg);
  CHECK(r.x[0] == doctest::Approx(3.0));
  CHECK(r.objective == doctest::Approx(-3.0));
  CHECK(r.slackness_residual <= 1e-9);

  // Three constraints through the optimal vertex (1, 1).
  MatrixXd d(3, 2);
  d << 1, 1, 1, 0, 0, 1;
  VectorXd db(3);
  db << 2, 1, 1;
  r = solve_lp(LinearProgram::nonnegative((VectorXd(2) << -1, -1).finished(), d, db), cfg);
  CHECK(r.objective == doctest::Approx(-2.0));
  CHECK(r.pivots <= binomial(5, 3));

  MatrixXd inf(2, 1);
  inf << 1, -1;
  try {
    solve_lp(LinearProgram::nonnegative(VectorXd::Constant(1, 1.0), inf, (VectorXd(2) << 1, -2).finished()), cfg);
    FAIL("expected infeasible");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Infeasible);
  }
  try {
    solve_lp(LinearProgram::nonnegative(VectorXd::Constant(1, -1.0), -a, VectorXd::Constant(1, 1.0)), cfg);
    FAIL("expected unbounded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Unbounded);
  }
}

TEST_CASE("relay-time LP against vertex enumeration") {
  std::mt19937_64 rng(9);
  SolverConfig cfg;
  for (int rep = 0; rep < 200; ++rep) {
    // Two relay phases: net energy per second, minimum times, harvest rows, deadline.
    VectorXd c(2);
    c << test::uniform(rng, -0.01, 1.0), test::uniform(rng, -0.01, 1.0);
    MatrixXd a(5, 2);
    VectorXd b(5);
    a << -1, 0, 0, -1, -test::uniform(rng, 0, 0.02), -test::uniform(rng, 0, 0.02),
        -test::uniform(rng, 0, 0.02), -test::uniform(rng, 0, 0.02), 1, 1;
    b << -test::uniform(rng, 0.01, 0.5), -test::uniform(rng, 0.01, 0.5), -test::uniform(rng, 0, 0.01),
        -test::uniform(rng, 0, 0.01), 5.0;
    const double best = enumerate_vertices(c, a, b);
    if (!std::isfinite(best)) {
      CHECK_THROWS_AS(solve_lp(LinearProgram::nonnegative(c, a, b), cfg), Error);
      continue;
    }
    const auto r = solve_lp(LinearProgram::nonnegative(c, a, b), cfg);
    CHECK(r.objective == doctest::Approx(best).epsilon(1e-9));
    CHECK(r.slackness_residual <= 1e-9);
    CHECK(r.pivots <= binomial(7, 5));
  }
}

TEST_CASE("bisection") {
  CHECK(bisect([](double x) { return x - 2.0; }, 0.0, 10.0, 1e-12) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(bisect([](double x) { return std::exp(x) - 3.0; }, 0.0, 5.0, 1e-14) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-12));
  try {
    bisect([](double x) { return x * x + 1.0; }, -1.0, 1.0, 1e-12);
    FAIL("expected a bracket error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Domain);
  }
  CHECK_THROWS_AS(bisect([](double x) { return x; }, 1.0, 1.0, 1e-12), Error);
  CHECK(convex_argmin_1d([](double x) { return x - 7.5; }, 0.0, 1e-12) == doctest::Approx(7.5));
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.barrier_mu = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SolverConfig{};
  cfg.v_max = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SolverConfig{};
  cfg.deadline = std::chrono::steady_clock::now() - std::chrono::seconds(1);
  CHECK_THROWS_AS(cfg.check_deadline(), Error);
}

TEST_CASE("gradient audit: TDMA program") {
  std::mt19937_64 rng(41);
  const auto topo = generate_topology(GeometryConfig{}, 1);
  const auto params = test::default_params(topo);
  const auto sets = initial_harvest_sets(Strategy::Tdma, topo, params);
  const auto built = build_tdma_convex_problem(topo, params, sets);
  const auto& L = built.layout;
  audit(built.problem, rng, 100, [&](int i) -> std::pair<double, double> {
    if (i < L.q_hat(0)) return {1e-5, 5e-4};
    if (i < L.t_device(0)) return {1e-3, 0.2};
    return {0.02, 0.3};
  });
}

TEST_CASE("gradient audit: NOMA programs") {
  std::mt19937_64 rng(43);
  const auto topo = generate_topology(GeometryConfig{}, 1);
  const auto params = test::default_params(topo);
  const auto sets = initial_harvest_sets(Strategy::Noma, topo, params);
  const auto seed = feasible_seed_noma(topo, params);
  for (bool free_tau : {true, false}) {
    const auto P = build_noma_problem(topo, params, sets, seed.allocation, free_tau);
    audit(P, rng, free_tau ? 60 : 40, [&](int i) -> std::pair<double, double> {
      const double lo = std::max(P.lower[i], 0.0);
      const double hi = P.upper[i];
      if (hi <= 1.5) return {lo + 0.05 * (hi - lo), hi};  // gateway powers
      return {std::max(lo, 0.05), std::min(hi, std::max(lo, 0.05) + 1.0)};
    });
  }
}

}
