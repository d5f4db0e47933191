#pragma once

#include "m2m/params.hpp"

namespace m2m {

/// Gated logistic harvester: zero below the sensitivity threshold, the
/// saturating logistic curve at or above it. Monotone and bounded by the
/// saturation power.
double eh_harvest(double received_w, const EhModel& eh);

/// The logistic curve without the sensitivity gate. Zero at x = 0, convex on
/// [0, b) and concave on x >= b.
double eh_harvest_smooth(double received_w, const EhModel& eh);
double eh_harvest_smooth_derivative(double received_w, const EhModel& eh);
double eh_harvest_smooth_second_derivative(double received_w, const EhModel& eh);

/// Perspective t * smooth(c / t), continuously extended by 0 at t = 0.
double eh_perspective(double energy_like, double time_s, const EhModel& eh);

}  // namespace m2m
