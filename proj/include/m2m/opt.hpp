#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace m2m {

struct SolverConfig {
  // Log-barrier interior point.
  double barrier_t0 = 1.0;     // initial gap is about |f(x0)| / barrier_t0
  double barrier_mu = 20.0;    // barrier weight multiplier per outer step
  double newton_tol = 1e-10;   // half squared Newton decrement
  int max_newton_iters = 80;   // per centering step
  int max_outer_iters = 40;
  double gap_tol = 1e-10;      // target m/t relative to max(1, |f|)
  double feas_tol = 1e-8;

  // Simplex.
  double lp_tol = 1e-10;
  int lp_max_pivots = 20000;

  // Scalar root finding and closed forms.
  double bisect_tol = 1e-10;
  double exponent_cap = 700.0;

  // Alternating optimisation.
  double theta = 1e-4;
  int v_max = 50;
  int inner_max = 30;
  double inner_theta_ratio = 0.1;

  std::uint64_t seed = 0;
  std::optional<std::chrono::steady_clock::time_point> deadline;

  void validate() const;
  /// Throws Error(Timeout) once the deadline has passed.
  void check_deadline() const;
};

/// A smooth function of a few coordinates of the full variable vector.
/// `eval(x_local, grad_local)` returns the value and writes the local
/// gradient when `grad_local` is non-empty. Non-finite values mark points
/// outside the domain.
struct Term {
  std::vector<int> support;
  std::function<double(std::span<const double>, std::span<double>)> eval;
  bool linear = false;
  std::string label;
};

/// min sum(objective) s.t. every constraint term <= 0 and lower <= x <= upper.
struct ConvexProblem {
  int dim = 0;
  std::vector<Term> objective;
  std::vector<Term> constraints;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  explicit ConvexProblem(int n = 0);

  void add_objective(Term term);
  void add_constraint(Term term);
  /// Adds sum_k coef[k] * x[idx[k]] + constant as an objective or constraint.
  static Term linear_term(std::vector<int> idx, std::vector<double> coef, double constant,
                          std::string label = {});

  double objective_value(const Eigen::VectorXd& x) const;
  double objective_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;
  double constraint_value(std::size_t c, const Eigen::VectorXd& x) const;
  /// Largest of g_c(x), lower - x and x - upper.
  double max_violation(const Eigen::VectorXd& x) const;
  bool strictly_feasible(const Eigen::VectorXd& x) const;
  void validate() const;
};

enum class SolveStatus { Converged, MaxIter };

struct ConvexResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  double gap = 0.0;             // m / t at exit
  double max_violation = 0.0;
  Eigen::VectorXd duals;        // one per constraint, refined from stationarity when active
  std::vector<double> history;  // objective after each centering step
  int newton_iters = 0;
  int outer_iters = 0;
  SolveStatus status = SolveStatus::Converged;
};

/// Log-barrier Newton method from a strictly feasible start. Hessians come
/// from central differences of the term gradients; indefinite systems are
/// shifted until positive definite. Throws StartInfeasible if `start` is not
/// strictly feasible.
ConvexResult solve_convex(const ConvexProblem& problem, const Eigen::VectorXd& start,
                          const SolverConfig& cfg);

struct PhaseOneResult {
  Eigen::VectorXd x;
  double max_violation = 0.0;
  bool feasible = false;
  int newton_iters = 0;
};

/// Minimises the largest constraint value over the box until every
/// constraint is below -margin. `start` is moved into the box interior first.
PhaseOneResult find_strictly_feasible(const ConvexProblem& problem, const Eigen::VectorXd& start,
                                      const SolverConfig& cfg, double margin = 1e-9);

/// min c'x s.t. A x <= b, lower <= x <= upper (lower finite, upper may be +inf).
struct LinearProgram {
  Eigen::VectorXd cost;
  Eigen::MatrixXd a_ub;
  Eigen::VectorXd b_ub;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static LinearProgram nonnegative(Eigen::VectorXd cost, Eigen::MatrixXd a_ub, Eigen::VectorXd b_ub);
  void validate() const;
};

struct LpResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  Eigen::VectorXd duals;        // one per row of A (<= 0 for a minimisation)
  double slackness_residual = 0.0;
  int pivots = 0;
};

/// Two-phase dense simplex with Bland's rule. Throws Infeasible or Unbounded.
LpResult solve_lp(const LinearProgram& lp, const SolverConfig& cfg);

/// Root of a function with f(lo) f(hi) <= 0. Stops when |f| <= tol or the
/// bracket is narrower than xtol_rel |x|. Throws Domain on a bad bracket.
double bisect(const std::function<double(double)>& f, double lo, double hi, double tol,
              double xtol_rel = 1e-15, int max_iter = 400);

/// Zero of an increasing derivative: starts at `lo` (where it must be
/// negative) and doubles the upper end until the sign changes, up to 1e9.
double convex_argmin_1d(const std::function<double(double)>& derivative, double lo, double tol);

}  // namespace m2m
