#pragma once

// Closed-form reference values, derived by hand and kept free of library
// calls so that tests compare the library against independent numbers.

#include <cmath>
#include <vector>

namespace oracle {

// Two communities at 0 and 1 on uniform [0,1], cost |x - c| + g/m. With
// m = (a, 1-a) the indifference point is x = a exactly when a = 1/2 or
// a(1-a) = g.
inline std::vector<double> inst_1d_fixed_points(double g) {
  std::vector<double> out;
  const double disc = 1.0 - 4.0 * g;
  if (disc > 0.0) out.push_back(0.5 * (1.0 - std::sqrt(disc)));
  out.push_back(0.5);
  if (disc > 0.0) out.push_back(0.5 * (1.0 + std::sqrt(disc)));
  return out;
}

// Indifference point of the same instance at nominal sizes (a, 1-a):
// x + g/a = (1 - x) + g/(1-a).
inline double inst_1d_split(double g, double a) {
  return 0.5 * (1.0 + g / (1.0 - a) - g / a);
}

// Total cost at m1 = a (both communities non-empty, split at a):
// integral of the distances plus g per community.
inline double inst_1d_total_cost(double g, double a) {
  return 0.5 * a * a + 0.5 * (1.0 - a) * (1.0 - a) + 2.0 * g;
}

// Integral over the border x = 1/2 of density / gradient gap for centers
// (0.25,0.5), (0.75,0.5): the gap is 0.5 / r, so the integrand is 2r with
// r = sqrt(0.0625 + (y - 0.5)^2). Closed form of int sqrt(a^2 + t^2) dt.
inline double sq2_border_integral() {
  const double a = 0.25;
  auto F = [a](double t) {
    return 0.5 * (t * std::sqrt(a * a + t * t) + a * a * std::asinh(t / a));
  };
  return 2.0 * (F(0.5) - F(-0.5));
}

// Scale term 1 / (d c_j / d m_j) at m_j = 1/2: -m^2 / g.
inline double sq2_scale_term(double g) { return -0.25 / g; }

// Condition sum with distance scale lambda: the gradient gap scales by
// lambda, so the border integral scales by 1 / lambda.
inline double sq2_condition(double g, double lambda = 1.0) {
  return sq2_border_integral() / lambda + sq2_scale_term(g);
}

inline double sq2_flip_g() { return 0.25 / sq2_border_integral(); }
inline double sq2_flip_lambda(double g) { return sq2_border_integral() * g / 0.25; }

// Centers 0.2 and 0.8: beyond 0.8 the distance difference is the constant
// 0.6, so with g = 0.06 the tail is indifferent when 0.06/m2 - 0.06/m1 = 0.6,
// i.e. 10 m1^2 - 8 m1 - 1 = 0, m1 = (4 + sqrt 26)/10. Mass of the
// indifferent tail: 0.2.
inline double flat_state_m1() { return (4.0 + std::sqrt(26.0)) / 10.0; }
inline double flat_tail_mass() { return 0.2; }

// Lloyd fixed point: centroids of the two half squares.
inline std::vector<double> lloyd_centers() { return {0.25, 0.5, 0.75, 0.5}; }

// Fee game: z maximizes z m - z^2 at fixed m = 1/2.
inline double fee_game_z() { return 0.25; }

}  // namespace oracle
