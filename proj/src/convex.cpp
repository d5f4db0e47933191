#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "m2m/error.hpp"
#include "m2m/opt.hpp"

namespace m2m {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Scratch {
  std::vector<double> x, g, gp, gm;
};

void gather(const Term& term, const VectorXd& x, std::vector<double>& out) {
  out.resize(term.support.size());
  for (std::size_t k = 0; k < term.support.size(); ++k) out[k] = x[term.support[k]];
}

double value_of(const Term& term, const VectorXd& x, Scratch& s) {
  gather(term, x, s.x);
  return term.eval(s.x, {});
}

double value_grad_of(const Term& term, const VectorXd& x, Scratch& s) {
  gather(term, x, s.x);
  s.g.assign(s.x.size(), 0.0);
  return term.eval(s.x, s.g);
}

// Central-difference Hessian of a term, scaled by w and added into H.
void add_hessian(const Term& term, const VectorXd& x, double w, MatrixXd& H, Scratch& s) {
  if (term.linear || w == 0.0) return;
  const std::size_t n = term.support.size();
  gather(term, x, s.x);
  MatrixXd local(n, n);
  std::vector<double> xl = s.x;
  for (std::size_t c = 0; c < n; ++c) {
    const double h = 1e-6 * std::max(std::abs(xl[c]), 1e-12);
    s.gp.assign(n, 0.0);
    s.gm.assign(n, 0.0);
    xl[c] = s.x[c] + h;
    term.eval(xl, s.gp);
    xl[c] = s.x[c] - h;
    term.eval(xl, s.gm);
    xl[c] = s.x[c];
    for (std::size_t r = 0; r < n; ++r) local(r, c) = (s.gp[r] - s.gm[r]) / (2.0 * h);
  }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      H(term.support[r], term.support[c]) += w * 0.5 * (local(r, c) + local(c, r));
}

class Barrier {
 public:
  explicit Barrier(const ConvexProblem& p) : p_(p) {
    for (int i = 0; i < p.dim; ++i) {
      if (std::isfinite(p.lower[i])) lower_.push_back(i);
      if (std::isfinite(p.upper[i])) upper_.push_back(i);
    }
  }

  int count() const {
    return static_cast<int>(p_.constraints.size() + lower_.size() + upper_.size());
  }

  bool inside_box(const VectorXd& x) const {
    for (int i : lower_)
      if (!(x[i] > p_.lower[i])) return false;
    for (int i : upper_)
      if (!(x[i] < p_.upper[i])) return false;
    return true;
  }

  // Largest step in [0, 1] along d that stays strictly inside the box.
  double box_step(const VectorXd& x, const VectorXd& d) const {
    double step = 1.0;
    for (int i : lower_)
      if (d[i] < 0) step = std::min(step, 0.99 * (p_.lower[i] - x[i]) / d[i]);
    for (int i : upper_)
      if (d[i] > 0) step = std::min(step, 0.99 * (p_.upper[i] - x[i]) / d[i]);
    return step;
  }

  // t f(x) + phi(x); +inf outside the strict interior.
  double value(const VectorXd& x, double t, Scratch& s, double* f_out = nullptr) const {
    if (!inside_box(x)) return kInf;
    double phi = 0.0;
    for (const auto& c : p_.constraints) {
      const double g = value_of(c, x, s);
      if (!(g < 0.0)) return kInf;
      phi -= std::log(-g);
    }
    for (int i : lower_) phi -= std::log(x[i] - p_.lower[i]);
    for (int i : upper_) phi -= std::log(p_.upper[i] - x[i]);
    double f = 0.0;
    for (const auto& o : p_.objective) f += value_of(o, x, s);
    if (!std::isfinite(f)) return kInf;
    if (f_out) *f_out = f;
    return t * f + phi;
  }

  void derivatives(const VectorXd& x, double t, VectorXd& grad, MatrixXd& H, Scratch& s) const {
    const int n = p_.dim;
    grad.setZero(n);
    H.setZero(n, n);
    for (const auto& o : p_.objective) {
      value_grad_of(o, x, s);
      for (std::size_t k = 0; k < o.support.size(); ++k) grad[o.support[k]] += t * s.g[k];
      add_hessian(o, x, t, H, s);
    }
    for (const auto& c : p_.constraints) {
      const double g = value_grad_of(c, x, s);
      const double inv = -1.0 / g;
      const std::vector<double> gg = s.g;
      for (std::size_t r = 0; r < c.support.size(); ++r) {
        grad[c.support[r]] += inv * gg[r];
        for (std::size_t q = 0; q < c.support.size(); ++q)
          H(c.support[r], c.support[q]) += inv * inv * gg[r] * gg[q];
      }
      add_hessian(c, x, inv, H, s);
    }
    for (int i : lower_) {
      const double d = x[i] - p_.lower[i];
      grad[i] -= 1.0 / d;
      H(i, i) += 1.0 / (d * d);
    }
    for (int i : upper_) {
      const double d = p_.upper[i] - x[i];
      grad[i] += 1.0 / d;
      H(i, i) += 1.0 / (d * d);
    }
  }

 private:
  const ConvexProblem& p_;
  std::vector<int> lower_, upper_;
};

// Solves (H + lambda I) d = -g with the smallest shift that is positive definite.
VectorXd newton_direction(const MatrixXd& H, const VectorXd& g) {
  const int n = static_cast<int>(g.size());
  double scale = 0.0;
  for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(H(i, i)));
  scale = std::max(scale, 1e-300);
  double shift = 0.0;
  for (int attempt = 0; attempt < 40; ++attempt) {
    Eigen::LLT<MatrixXd> llt(H + shift * MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) {
      VectorXd d = llt.solve(-g);
      if (d.allFinite()) return d;
    }
    shift = shift == 0.0 ? 1e-12 * scale : shift * 10.0;
  }
  fail(ErrorKind::Numeric, "Newton system could not be regularised");
}

// Multipliers of the near-active constraints and bounds from a least-squares
// fit of stationarity. The barrier estimate 1 / (-t g) loses digits once the
// slack is close to rounding level; it is kept when the fit is no better.
void refine_duals(const ConvexProblem& p, const VectorXd& x, double t, VectorXd& duals, Scratch& s) {
  const double active = 1e3 / t;
  std::vector<VectorXd> cols;
  std::vector<int> which;  // constraint index, or -1 for a bound
  VectorXd grad(p.dim);
  p.objective_gradient(x, grad);
  VectorXd resid = grad;
  for (std::size_t c = 0; c < p.constraints.size(); ++c) {
    const auto& term = p.constraints[c];
    value_grad_of(term, x, s);
    VectorXd col = VectorXd::Zero(p.dim);
    for (std::size_t k = 0; k < term.support.size(); ++k) col[term.support[k]] += s.g[k];
    const double lam = duals[static_cast<Eigen::Index>(c)];
    resid += lam * col;
    if (lam >= active) {
      cols.push_back(std::move(col));
      which.push_back(static_cast<int>(c));
    }
  }
  for (int i = 0; i < p.dim; ++i) {
    const double lo = std::isfinite(p.lower[i]) ? 1.0 / (t * (x[i] - p.lower[i])) : 0.0;
    const double hi = std::isfinite(p.upper[i]) ? 1.0 / (t * (p.upper[i] - x[i])) : 0.0;
    resid[i] += hi - lo;
    for (double sign : {-1.0, 1.0}) {
      if ((sign < 0.0 ? lo : hi) < active) continue;
      VectorXd col = VectorXd::Zero(p.dim);
      col[i] = sign;
      cols.push_back(std::move(col));
      which.push_back(-1);
    }
  }
  if (cols.empty()) return;
  MatrixXd A(p.dim, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) A.col(static_cast<Eigen::Index>(k)) = cols[k];
  const VectorXd lam = A.colPivHouseholderQr().solve(-grad);
  if (!lam.allFinite() || lam.minCoeff() < 0.0) return;
  if ((grad + A * lam).norm() > resid.norm()) return;
  for (std::size_t k = 0; k < which.size(); ++k)
    if (which[k] >= 0) duals[which[k]] = lam[static_cast<Eigen::Index>(k)];
}

using StopFn = std::function<bool(const VectorXd&)>;

ConvexResult barrier_solve(const ConvexProblem& p, const VectorXd& start, const SolverConfig& cfg,
                           const StopFn* stop) {
  cfg.validate();
  p.validate();
  if (start.size() != p.dim) fail(ErrorKind::Dimension, "start point has wrong dimension");
  if (!p.strictly_feasible(start))
    fail(ErrorKind::StartInfeasible,
         "interior-point start is not strictly feasible (max violation " +
             std::to_string(p.max_violation(start)) + ")");

  Barrier barrier(p);
  Scratch s;
  ConvexResult res;
  VectorXd x = start;
  const int m = barrier.count();
  double f = p.objective_value(x);
  double t = m > 0 ? cfg.barrier_t0 * m / std::max(std::abs(f), 1.0) : 1.0;

  VectorXd grad;
  MatrixXd H;
  bool stopped = false;
  for (int outer = 0; outer < cfg.max_outer_iters; ++outer) {
    for (int it = 0; it < cfg.max_newton_iters; ++it) {
      cfg.check_deadline();
      barrier.derivatives(x, t, grad, H, s);
      const VectorXd d = newton_direction(H, grad);
      const double slope = grad.dot(d);
      if (-slope / 2.0 <= cfg.newton_tol) break;
      const double f0 = barrier.value(x, t, s);
      double step = barrier.box_step(x, d);
      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt, step *= 0.5) {
        const VectorXd xn = x + step * d;
        const double fn = barrier.value(xn, t, s);
        if (std::isfinite(fn) && fn <= f0 + 0.01 * step * slope) {
          x = xn;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      ++res.newton_iters;
      if (stop && (*stop)(x)) {
        stopped = true;
        break;
      }
    }
    f = p.objective_value(x);
    res.history.push_back(f);
    res.outer_iters = outer + 1;
    res.gap = m > 0 ? m / t : 0.0;
    if (stopped || m == 0 || res.gap <= cfg.gap_tol * std::max(1.0, std::abs(f))) break;
    if (outer + 1 == cfg.max_outer_iters) res.status = SolveStatus::MaxIter;
    t *= cfg.barrier_mu;
  }

  res.x = x;
  res.objective = f;
  res.max_violation = p.max_violation(x);
  res.duals.resize(static_cast<Eigen::Index>(p.constraints.size()));
  for (std::size_t c = 0; c < p.constraints.size(); ++c)
    res.duals[static_cast<Eigen::Index>(c)] = 1.0 / (-t * p.constraint_value(c, x));
  refine_duals(p, x, t, res.duals, s);
  return res;
}

}  // namespace

ConvexProblem::ConvexProblem(int n)
    : dim(n), lower(VectorXd::Constant(n, -kInf)), upper(VectorXd::Constant(n, kInf)) {}

void ConvexProblem::add_objective(Term term) { objective.push_back(std::move(term)); }
void ConvexProblem::add_constraint(Term term) { constraints.push_back(std::move(term)); }

Term ConvexProblem::linear_term(std::vector<int> idx, std::vector<double> coef, double constant,
                                std::string label) {
  if (idx.size() != coef.size()) fail(ErrorKind::Dimension, "linear term index/coef mismatch");
  Term term;
  term.support = std::move(idx);
  term.linear = true;
  term.label = std::move(label);
  term.eval = [coef = std::move(coef), constant](std::span<const double> x, std::span<double> g) {
    double v = constant;
    for (std::size_t k = 0; k < coef.size(); ++k) v += coef[k] * x[k];
    if (!g.empty())
      for (std::size_t k = 0; k < coef.size(); ++k) g[k] = coef[k];
    return v;
  };
  return term;
}

double ConvexProblem::objective_value(const VectorXd& x) const {
  Scratch s;
  double f = 0.0;
  for (const auto& o : objective) f += value_of(o, x, s);
  return f;
}

double ConvexProblem::objective_gradient(const VectorXd& x, VectorXd& grad) const {
  Scratch s;
  grad.setZero(dim);
  double f = 0.0;
  for (const auto& o : objective) {
    f += value_grad_of(o, x, s);
    for (std::size_t k = 0; k < o.support.size(); ++k) grad[o.support[k]] += s.g[k];
  }
  return f;
}

double ConvexProblem::constraint_value(std::size_t c, const VectorXd& x) const {
  Scratch s;
  return value_of(constraints.at(c), x, s);
}

double ConvexProblem::max_violation(const VectorXd& x) const {
  double worst = -kInf;
  Scratch s;
  for (const auto& c : constraints) {
    const double g = value_of(c, x, s);
    worst = std::max(worst, std::isfinite(g) ? g : kInf);
  }
  for (int i = 0; i < dim; ++i) {
    if (std::isfinite(lower[i])) worst = std::max(worst, lower[i] - x[i]);
    if (std::isfinite(upper[i])) worst = std::max(worst, x[i] - upper[i]);
  }
  return worst;
}

bool ConvexProblem::strictly_feasible(const VectorXd& x) const {
  if (x.size() != dim || !x.allFinite()) return false;
  for (int i = 0; i < dim; ++i)
    if (!(x[i] > lower[i]) || !(x[i] < upper[i])) return false;
  Scratch s;
  for (const auto& c : constraints)
    if (!(value_of(c, x, s) < 0.0)) return false;
  for (const auto& o : objective)
    if (!std::isfinite(value_of(o, x, s))) return false;
  return true;
}

void ConvexProblem::validate() const {
  if (dim < 0 || lower.size() != dim || upper.size() != dim)
    fail(ErrorKind::Dimension, "convex problem bounds do not match its dimension");
  for (int i = 0; i < dim; ++i)
    if (!(lower[i] < upper[i])) fail(ErrorKind::Config, "empty box for variable " + std::to_string(i));
  auto check = [&](const Term& t) {
    if (!t.eval) fail(ErrorKind::Config, "term '" + t.label + "' has no evaluator");
    for (int k : t.support)
      if (k < 0 || k >= dim) fail(ErrorKind::Dimension, "term '" + t.label + "' indexes outside the problem");
  };
  for (const auto& t : objective) check(t);
  for (const auto& t : constraints) check(t);
}

ConvexResult solve_convex(const ConvexProblem& problem, const VectorXd& start,
                          const SolverConfig& cfg) {
  return barrier_solve(problem, start, cfg, nullptr);
}

PhaseOneResult find_strictly_feasible(const ConvexProblem& problem, const VectorXd& start,
                                      const SolverConfig& cfg, double margin) {
  problem.validate();
  if (start.size() != problem.dim) fail(ErrorKind::Dimension, "start point has wrong dimension");
  const int n = problem.dim;
  VectorXd x = start;
  for (int i = 0; i < n; ++i) {
    const double lo = problem.lower[i], hi = problem.upper[i];
    const double width = std::isfinite(lo) && std::isfinite(hi) ? hi - lo : kInf;
    if (std::isfinite(lo) && !(x[i] > lo))
      x[i] = lo + (std::isfinite(width) ? 1e-6 * width : std::max(1e-8, 1e-6 * std::abs(lo)));
    if (std::isfinite(hi) && !(x[i] < hi))
      x[i] = hi - (std::isfinite(width) ? 1e-6 * width : std::max(1e-8, 1e-6 * std::abs(hi)));
  }

  auto worst_constraint = [&](const VectorXd& y) {
    double w = -kInf;
    for (std::size_t c = 0; c < problem.constraints.size(); ++c) {
      const double g = problem.constraint_value(c, y);
      w = std::max(w, std::isfinite(g) ? g : kInf);
    }
    return w;
  };

  PhaseOneResult out;
  const double w0 = worst_constraint(x);
  if (!std::isfinite(w0))
    fail(ErrorKind::StartInfeasible, "phase-1 start lies outside the constraint domain");
  if (w0 < -margin || problem.constraints.empty()) {
    out.x = x;
    out.max_violation = problem.constraints.empty() ? -kInf : w0;
    out.feasible = true;
    return out;
  }

  ConvexProblem aux(n + 1);
  aux.lower.head(n) = problem.lower;
  aux.upper.head(n) = problem.upper;
  aux.add_objective(ConvexProblem::linear_term({n}, {1.0}, 0.0, "phase1"));
  for (const auto& c : problem.constraints) {
    Term t;
    t.support = c.support;
    t.support.push_back(n);
    t.linear = c.linear;
    t.label = c.label;
    t.eval = [inner = c.eval](std::span<const double> xl, std::span<double> g) {
      const std::size_t k = xl.size() - 1;
      const double v = inner(xl.first(k), g.empty() ? g : g.first(k));
      if (!g.empty()) g[k] = -1.0;
      return v - xl[k];
    };
    aux.add_constraint(std::move(t));
  }
  VectorXd z(n + 1);
  z.head(n) = x;
  z[n] = w0 + 0.1 * std::max(1.0, std::abs(w0));

  const StopFn stop = [&](const VectorXd& y) { return worst_constraint(y.head(n)) < -margin; };
  SolverConfig c2 = cfg;
  c2.gap_tol = std::min(cfg.gap_tol, 1e-12);
  const ConvexResult r = barrier_solve(aux, z, c2, &stop);
  out.x = r.x.head(n);
  out.max_violation = worst_constraint(out.x);
  out.feasible = out.max_violation < 0.0 && problem.strictly_feasible(out.x);
  out.newton_iters = r.newton_iters;
  return out;
}

}  // namespace m2m
