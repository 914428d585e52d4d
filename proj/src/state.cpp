#include "tiebout/state.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "tiebout/error.hpp"

namespace tiebout {

BlockLayout BlockLayout::from_sizes(std::span<const std::size_t> sizes) {
  BlockLayout layout;
  for (auto s : sizes) layout.offsets.push_back(layout.offsets.back() + s);
  return layout;
}

BlockLayout BlockLayout::empty(std::size_t communities) {
  BlockLayout layout;
  layout.offsets.assign(communities + 1, 0);
  return layout;
}

NominalState NominalState::sizes_only(std::vector<double> m, double epsilon) {
  NominalState s;
  const std::size_t n = m.size();
  s.m = std::move(m);
  s.v_layout = BlockLayout::empty(n);
  s.z_layout = BlockLayout::empty(n);
  s.epsilon = epsilon;
  return s;
}

void NominalState::validate(double simplex_tolerance) const {
  require(!m.empty(), "state has no communities");
  const double total = std::accumulate(m.begin(), m.end(), 0.0);
  require(std::abs(total - 1.0) <= simplex_tolerance,
          "community sizes must sum to 1");
  for (double mi : m) {
    require(mi >= epsilon - simplex_tolerance, "community size below the floor");
  }
  require(v_layout.blocks() == m.size() && v_layout.total() == v.size(),
          "characteristics layout does not match the state");
  require(z_layout.blocks() == m.size() && z_layout.total() == z.size(),
          "provider layout does not match the state");
  for (double x : v) require(x >= 0.0 && x <= 1.0, "characteristic outside [0,1]");
  for (double x : z) require(x >= 0.0 && x <= 1.0, "provider parameter outside [0,1]");
}

std::vector<double> project_to_restricted_simplex(std::span<const double> m,
                                                  double epsilon) {
  const std::size_t n = m.size();
  require(n >= 1, "cannot project an empty vector");
  const double radius = 1.0 - static_cast<double>(n) * epsilon;
  require(radius >= 0.0, "simplex floor too large for the community count");
  // Sort-based projection of (m - epsilon) onto the simplex of mass `radius`.
  std::vector<double> y(m.begin(), m.end());
  for (double& v : y) v -= epsilon;
  std::vector<double> sorted = y;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    cumulative += sorted[k];
    const double candidate = (cumulative - radius) / static_cast<double>(k + 1);
    if (sorted[k] - candidate > 0.0) theta = candidate;
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::max(y[i] - theta, 0.0) + epsilon;
  // Exact simplex identity: push the rounding residue onto the largest entry.
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  auto largest = std::max_element(out.begin(), out.end());
  *largest += 1.0 - total;
  return out;
}

double sup_norm_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace tiebout
