#pragma once

#include <cmath>

namespace m2m::detail {

// expm1(x) - x e^x without cancellation near 0.
inline double expm1_minus_xexp(double x) {
  if (std::abs(x) > 0.1) return std::expm1(x) - x * std::exp(x);
  double term = x;
  double sum = 0.0;
  for (int n = 2; n < 30; ++n) {
    term *= x / (n - 1);
    sum -= term * (n - 1) / n;
  }
  return sum;
}

}  // namespace m2m::detail
