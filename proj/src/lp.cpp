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

struct Tableau {
  MatrixXd T;               // rows x (cols + 1), last column is the rhs
  std::vector<int> basis;   // basic column per row
  int cols = 0;
  int pivots = 0;

  void pivot(int row, int col, VectorXd& z) {
    T.row(row) /= T(row, col);
    for (int r = 0; r < T.rows(); ++r)
      if (r != row && T(r, col) != 0.0) T.row(r) -= T(r, col) * T.row(row);
    if (z[col] != 0.0) z -= z[col] * T.row(row).transpose();
    basis[row] = col;
    ++pivots;
  }

  // Bland's rule on reduced-cost row z (z[cols] holds -objective).
  // Returns false if unbounded.
  bool run(VectorXd& z, const std::vector<bool>& allowed, double tol, int max_pivots) {
    const int rhs = cols;
    while (true) {
      int enter = -1;
      for (int j = 0; j < cols; ++j)
        if (allowed[j] && z[j] < -tol) {
          enter = j;
          break;
        }
      if (enter < 0) return true;
      int leave = -1;
      double best = kInf;
      for (int r = 0; r < T.rows(); ++r) {
        if (T(r, enter) <= tol) continue;
        const double ratio = T(r, rhs) / T(r, enter);
        const double slack = 1e-14 * std::max(1.0, std::abs(best));
        if (leave < 0 || ratio < best - slack ||
            (std::abs(ratio - best) <= slack && basis[r] < basis[leave])) {
          best = ratio;
          leave = r;
        }
      }
      if (leave < 0) return false;
      if (pivots >= max_pivots)
        fail(ErrorKind::Numeric, "simplex pivot limit reached (" + std::to_string(max_pivots) + ")");
      pivot(leave, enter, z);
    }
  }
};

}  // namespace

LinearProgram LinearProgram::nonnegative(VectorXd cost, MatrixXd a_ub, VectorXd b_ub) {
  LinearProgram lp;
  const auto n = cost.size();
  lp.cost = std::move(cost);
  lp.a_ub = std::move(a_ub);
  lp.b_ub = std::move(b_ub);
  lp.lower = VectorXd::Zero(n);
  lp.upper = VectorXd::Constant(n, kInf);
  return lp;
}

void LinearProgram::validate() const {
  const auto n = cost.size();
  if (a_ub.cols() != n || a_ub.rows() != b_ub.size() || lower.size() != n || upper.size() != n)
    fail(ErrorKind::Dimension, "linear program dimensions are inconsistent");
  if (!cost.allFinite() || !a_ub.allFinite() || !b_ub.allFinite() || !lower.allFinite())
    fail(ErrorKind::Config, "linear program has non-finite data");
  for (Eigen::Index i = 0; i < n; ++i)
    if (upper[i] < lower[i]) fail(ErrorKind::Infeasible, "variable bounds cross");
}

LpResult solve_lp(const LinearProgram& lp, const SolverConfig& cfg) {
  lp.validate();
  const int n = static_cast<int>(lp.cost.size());
  const int m = static_cast<int>(lp.a_ub.rows());
  std::vector<int> upper_idx;
  for (int k = 0; k < n; ++k)
    if (std::isfinite(lp.upper[k])) upper_idx.push_back(k);
  const int rows = m + static_cast<int>(upper_idx.size());

  // Shifted system y = x - lower:  A_full y <= rhs.
  MatrixXd a_full = MatrixXd::Zero(rows, n);
  VectorXd rhs(rows);
  a_full.topRows(m) = lp.a_ub;
  rhs.head(m) = lp.b_ub - lp.a_ub * lp.lower;
  for (std::size_t r = 0; r < upper_idx.size(); ++r) {
    a_full(m + static_cast<int>(r), upper_idx[r]) = 1.0;
    rhs[m + static_cast<int>(r)] = lp.upper[upper_idx[r]] - lp.lower[upper_idx[r]];
  }

  std::vector<int> art_row;
  for (int r = 0; r < rows; ++r)
    if (rhs[r] < 0) art_row.push_back(r);
  const int n_art = static_cast<int>(art_row.size());

  Tableau tab;
  tab.cols = n + rows + n_art;
  tab.T = MatrixXd::Zero(rows, tab.cols + 1);
  tab.basis.assign(rows, -1);
  for (int r = 0; r < rows; ++r) {
    const double sign = rhs[r] < 0 ? -1.0 : 1.0;
    double scale = std::abs(rhs[r]);
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(a_full(r, j)));
    scale = scale > 0 ? scale : 1.0;
    tab.T.row(r).head(n) = sign * a_full.row(r) / scale;
    tab.T(r, n + r) = sign;
    tab.T(r, tab.cols) = sign * rhs[r] / scale;
    if (sign > 0) tab.basis[r] = n + r;
  }
  for (int a = 0; a < n_art; ++a) {
    tab.T(art_row[a], n + rows + a) = 1.0;
    tab.basis[art_row[a]] = n + rows + a;
  }
  const double tol = cfg.lp_tol;
  std::vector<bool> allowed(tab.cols, true);

  if (n_art > 0) {
    VectorXd z = VectorXd::Zero(tab.cols + 1);
    for (int a = 0; a < n_art; ++a) z[n + rows + a] = 1.0;
    for (int a = 0; a < n_art; ++a) z -= tab.T.row(art_row[a]).transpose();
    tab.run(z, allowed, tol, cfg.lp_max_pivots);
    if (-z[tab.cols] > 1e3 * tol * std::max(1.0, rhs.cwiseAbs().maxCoeff()))
      fail(ErrorKind::Infeasible, "linear program is infeasible (phase-1 residual " +
                                      std::to_string(-z[tab.cols]) + ")");
    // Drive zero-level artificials out of the basis where possible.
    for (int r = 0; r < rows; ++r) {
      if (tab.basis[r] < n + rows) continue;
      for (int j = 0; j < n + rows; ++j)
        if (std::abs(tab.T(r, j)) > tol) {
          VectorXd dummy = VectorXd::Zero(tab.cols + 1);
          tab.pivot(r, j, dummy);
          break;
        }
    }
    for (int a = 0; a < n_art; ++a) allowed[n + rows + a] = false;
  }

  VectorXd z = VectorXd::Zero(tab.cols + 1);
  z.head(n) = lp.cost;
  for (int r = 0; r < rows; ++r) {
    const int b = tab.basis[r];
    if (b < n && lp.cost[b] != 0.0) z -= lp.cost[b] * tab.T.row(r).transpose();
  }
  if (!tab.run(z, allowed, tol, cfg.lp_max_pivots))
    fail(ErrorKind::Unbounded, "linear program is unbounded");

  LpResult res;
  res.pivots = tab.pivots;
  VectorXd y = VectorXd::Zero(n);
  for (int r = 0; r < rows; ++r)
    if (tab.basis[r] < n) y[tab.basis[r]] = std::max(0.0, tab.T(r, tab.cols));
  res.x = lp.lower + y;
  res.objective = lp.cost.dot(res.x);

  // Duals from B' w = c_B in the unscaled, unsigned system [A_full | I | -I_art].
  MatrixXd basis_mat(rows, rows);
  VectorXd cb = VectorXd::Zero(rows);
  for (int r = 0; r < rows; ++r) {
    const int b = tab.basis[r];
    VectorXd col = VectorXd::Zero(rows);
    if (b < n) {
      col = a_full.col(b);
      cb[r] = lp.cost[b];
    } else if (b < n + rows) {
      col[b - n] = 1.0;
    } else {
      col[art_row[b - n - rows]] = -1.0;
    }
    basis_mat.col(r) = col;
  }
  const VectorXd w = basis_mat.transpose().partialPivLu().solve(cb);
  res.duals = w.head(m);
  const VectorXd reduced = lp.cost - a_full.transpose() * w;
  const VectorXd row_slack = rhs - a_full * y;
  double cs = 0.0;
  for (int r = 0; r < rows; ++r) cs = std::max(cs, std::abs(w[r] * row_slack[r]));
  for (int j = 0; j < n; ++j) cs = std::max(cs, std::abs(reduced[j] * y[j]));
  res.slackness_residual = cs;
  return res;
}

}  // namespace m2m
