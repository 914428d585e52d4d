#include "tiebout/cell_quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace tiebout {

double linear_cell_fraction_below(double value, std::span<const double> spread,
                                  double threshold) {
  // value + sum spread_a u_a = value - S + W with W a sum of independent
  // uniforms on [0, b_a], b_a = 2 |spread_a|.
  std::vector<double> widths;
  double largest = 0.0;
  for (double s : spread) largest = std::max(largest, std::abs(s));
  double shift = 0.0;
  for (double s : spread) {
    const double b = std::abs(s);
    if (b > 1e-14 * largest && b > 0.0) {
      widths.push_back(2.0 * b);
      shift += b;
    }
  }
  const double w = threshold - value + shift;
  if (widths.empty()) return value < threshold ? 1.0 : 0.0;
  double total = 0.0;
  for (double b : widths) total += b;
  if (w <= 0.0) return 0.0;
  if (w >= total) return 1.0;

  // CDF of the sum: inclusion-exclusion over vertex subsets,
  //   (1 / (k! prod b)) sum_J (-1)^|J| (w - sum_J b)_+^k.
  const std::size_t k = widths.size();
  double norm = 1.0;
  for (std::size_t a = 0; a < k; ++a) norm *= widths[a] * static_cast<double>(a + 1);
  double acc = 0.0;
  for (std::size_t subset = 0; subset < (std::size_t{1} << k); ++subset) {
    double offset = 0.0;
    int parity = 0;
    for (std::size_t a = 0; a < k; ++a) {
      if ((subset >> a) & 1U) {
        offset += widths[a];
        parity ^= 1;
      }
    }
    const double r = w - offset;
    if (r <= 0.0) continue;
    const double term = std::pow(r, static_cast<double>(k));
    acc += parity ? -term : term;
  }
  return std::clamp(acc / norm, 0.0, 1.0);
}

}  // namespace tiebout
