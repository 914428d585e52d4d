#pragma once

#include <span>

namespace tiebout {

// Fraction of a box cell on which the linear function
//   value + sum_a spread_a * u_a,   u uniform on [-1, 1]^k
// lies below `threshold`, where spread_a = slope_a * half_width_a.
// Exact for linear integrands (volume of a box cut by a half-space).
double linear_cell_fraction_below(double value, std::span<const double> spread,
                                  double threshold);

}  // namespace tiebout
