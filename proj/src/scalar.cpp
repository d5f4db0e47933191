#include <algorithm>
#include <cmath>
#include <string>

#include "m2m/error.hpp"
#include "m2m/opt.hpp"

namespace m2m {

void SolverConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) fail(ErrorKind::Config, std::string("solver config: ") + what);
  };
  need(barrier_t0 > 0, "barrier_t0 must be positive");
  need(barrier_mu > 1, "barrier_mu must exceed 1");
  need(newton_tol > 0 && gap_tol > 0 && feas_tol > 0, "tolerances must be positive");
  need(max_newton_iters >= 1 && max_outer_iters >= 1, "iteration caps must be at least 1");
  need(lp_tol > 0 && lp_max_pivots >= 1, "LP settings must be positive");
  need(bisect_tol > 0 && exponent_cap > 0, "bisection tolerance and exponent cap must be positive");
  need(theta > 0 && v_max >= 1 && inner_max >= 1 && inner_theta_ratio > 0,
       "alternating-optimisation settings must be positive");
}

void SolverConfig::check_deadline() const {
  if (deadline && std::chrono::steady_clock::now() > *deadline)
    fail(ErrorKind::Timeout, "solve exceeded its time limit");
}

double bisect(const std::function<double(double)>& f, double lo, double hi, double tol,
              double xtol_rel, int max_iter) {
  if (!(lo < hi)) fail(ErrorKind::Domain, "bisect: empty bracket");
  double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (!std::isfinite(flo) || !std::isfinite(fhi) || (flo > 0) == (fhi > 0))
    fail(ErrorKind::Domain, "bisect: f(lo) = " + std::to_string(flo) + " and f(hi) = " +
                                std::to_string(fhi) + " do not bracket a root");
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < max_iter; ++it) {
    mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (std::abs(fm) <= tol || hi - lo <= xtol_rel * std::abs(mid)) return mid;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return mid;
}

double convex_argmin_1d(const std::function<double(double)>& derivative, double lo, double tol) {
  if (!(derivative(lo) < 0.0))
    fail(ErrorKind::Numeric, "derivative is not negative at the lower bracket end");
  double hi = std::max(1.0, 2.0 * lo);
  while (derivative(hi) <= 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e9) fail(ErrorKind::Numeric, "bracket expansion passed 1e9");
  }
  return bisect(derivative, lo, hi, tol);
}

}  // namespace m2m
