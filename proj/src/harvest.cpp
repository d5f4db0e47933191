#include "m2m/harvest.hpp"

#include <cmath>

namespace m2m {

namespace {

// z = exp(-a (x - 2b)); the logistic is M [ (1+E)/(E+z) - 1/E ] with E = exp(ab).
struct Logistic {
  double big_e;
  double z;
};

Logistic logistic_terms(double x, const EhModel& eh) {
  return {std::exp(eh.a * eh.b), std::exp(-eh.a * (x - 2.0 * eh.b))};
}

}  // namespace

double eh_harvest_smooth(double x, const EhModel& eh) {
  const auto [e, z] = logistic_terms(x, eh);
  return eh.saturation_w * ((1.0 + e) / (e + z) - 1.0 / e);
}

double eh_harvest_smooth_derivative(double x, const EhModel& eh) {
  const auto [e, z] = logistic_terms(x, eh);
  if (!std::isfinite(z)) return 0.0;
  const double denom = e + z;
  return eh.saturation_w * (1.0 + e) * eh.a * z / (denom * denom);
}

double eh_harvest_smooth_second_derivative(double x, const EhModel& eh) {
  const auto [e, z] = logistic_terms(x, eh);
  if (!std::isfinite(z)) return 0.0;
  const double denom = e + z;
  return eh.saturation_w * (1.0 + e) * eh.a * eh.a * z * (z - e) / (denom * denom * denom);
}

double eh_harvest(double x, const EhModel& eh) {
  if (x < eh.threshold_w) return 0.0;
  return eh_harvest_smooth(x, eh);
}

double eh_perspective(double energy_like, double time_s, const EhModel& eh) {
  if (time_s <= 0.0) return 0.0;
  return time_s * eh_harvest_smooth(energy_like / time_s, eh);
}

}  // namespace m2m
