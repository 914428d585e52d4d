#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tiebout {

// Block layout of a flat parameter vector: block i occupies
// [offsets[i], offsets[i+1]).
struct BlockLayout {
  std::vector<std::size_t> offsets{0};

  static BlockLayout from_sizes(std::span<const std::size_t> sizes);
  static BlockLayout empty(std::size_t communities);

  std::size_t blocks() const { return offsets.size() - 1; }
  std::size_t size(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
  std::size_t total() const { return offsets.back(); }
};

// A point (m, v, z) of the restricted size simplex times the
// characteristics cube times the provider parameter boxes.
struct NominalState {
  std::vector<double> m;
  std::vector<double> v;
  BlockLayout v_layout;
  std::vector<double> z;
  BlockLayout z_layout;
  double epsilon = 0.0;

  static NominalState sizes_only(std::vector<double> m, double epsilon = 0.0);

  std::size_t communities() const { return m.size(); }
  std::span<const double> v_block(std::size_t i) const {
    return {v.data() + v_layout.offsets[i], v_layout.size(i)};
  }
  std::span<const double> z_block(std::size_t i) const {
    return {z.data() + z_layout.offsets[i], z_layout.size(i)};
  }
  std::span<double> z_block(std::size_t i) {
    return {z.data() + z_layout.offsets[i], z_layout.size(i)};
  }

  // Throws invalid_argument on a broken simplex identity, floor, or blocks
  // outside [0, 1].
  void validate(double simplex_tolerance = 1e-12) const;
};

// Euclidean projection onto {m : m_i >= epsilon, sum m_i = 1}.
std::vector<double> project_to_restricted_simplex(std::span<const double> m,
                                                  double epsilon);

double sup_norm_distance(std::span<const double> a, std::span<const double> b);

}  // namespace tiebout
