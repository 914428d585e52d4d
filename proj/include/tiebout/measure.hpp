#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace tiebout {

using Point = std::vector<double>;
using PointView = std::span<const double>;

struct Box {
  Point lo;
  Point hi;

  std::size_t dimension() const { return lo.size(); }
  bool contains(PointView x) const;
  double volume() const;
};

// Support of a type density: a bounding box, optionally restricted by a
// membership predicate (e.g. a disk inside its bounding square).
struct Support {
  Box bounds;
  std::function<bool(PointView)> predicate;  // empty means the whole box
  std::string description = "box";

  bool contains(PointView x) const {
    return bounds.contains(x) && (!predicate || predicate(x));
  }
};

Support box_support(Box bounds);
Support ball_support(Point center, double radius);

struct DensitySpec {
  enum class Kind { uniform, piecewise_constant, tabulated };

  struct Piece {
    Box box;
    double value = 0.0;
  };

  Kind kind = Kind::uniform;
  // piecewise_constant: first piece containing x wins, else `background`.
  std::vector<Piece> pieces;
  double background = 0.0;
  // tabulated: node coordinates per axis and values in row-major order
  // (last axis fastest), multilinear between nodes, zero outside.
  std::vector<std::vector<double>> nodes;
  std::vector<double> values;

  double operator()(PointView x) const;
  double upper_bound() const;
};

struct TypeSpace {
  std::size_t type_index = 0;
  std::size_t dimension = 1;
  Support support;
  DensitySpec density;
  double mass_share = 1.0;
};

// Weighted sample of one agent type. Grid samples carry the half widths
// of their cells so that integrands can be resolved below the sample
// spacing; Monte-Carlo samples leave `half_widths` empty.
struct TypeSample {
  TypeSpace space;
  std::vector<double> points;  // row-major, size() * dimension entries
  std::vector<double> weights;
  Point half_widths;
  double raw_mass = 0.0;       // integral of the raw density before normalization
  double density_scale = 1.0;  // normalized density = scale * raw density

  std::size_t dimension() const { return space.dimension; }
  std::size_t size() const { return weights.size(); }
  PointView point(std::size_t s) const {
    return {points.data() + s * dimension(), dimension()};
  }
  bool has_cells() const { return !half_widths.empty(); }
};

class SampledMeasure {
 public:
  enum class Provenance { grid, monte_carlo };

  SampledMeasure() = default;
  SampledMeasure(std::vector<TypeSample> types, Provenance provenance,
                 std::uint64_t seed, std::size_t resolution);

  std::size_t type_count() const { return types_.size(); }
  const TypeSample& type(std::size_t j) const { return types_[j]; }
  std::span<const TypeSample> types() const { return types_; }

  // Total number of samples across types; samples are addressed globally
  // in type order.
  std::size_t size() const { return offsets_.back(); }
  std::size_t offset(std::size_t j) const { return offsets_[j]; }

  Provenance provenance() const { return provenance_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t resolution() const { return resolution_; }

  double total_mass() const;
  // Normalized density of type j at x (zero off support).
  double density(std::size_t j, PointView x) const;

 private:
  std::vector<TypeSample> types_;
  std::vector<std::size_t> offsets_{0};
  Provenance provenance_ = Provenance::grid;
  std::uint64_t seed_ = 0;
  std::size_t resolution_ = 0;
};

// Midpoint rule: one point per cell whose midpoint is in the support,
// weight density * cell volume, normalized to the type's mass share.
SampledMeasure build_grid_measure(const std::vector<TypeSpace>& spaces,
                                  std::size_t cells_per_axis);
SampledMeasure build_grid_measure(const TypeSpace& space,
                                  std::size_t cells_per_axis);

// Rejection sampling inside the bounding box; equal weights pi_j / n.
SampledMeasure build_monte_carlo_measure(const std::vector<TypeSpace>& spaces,
                                         std::size_t n, std::uint64_t seed);
SampledMeasure build_monte_carlo_measure(const TypeSpace& space, std::size_t n,
                                         std::uint64_t seed);

using SamplePredicate = std::function<bool(std::size_t type, PointView x)>;

double measure_of(const SampledMeasure& mu, const SamplePredicate& predicate);

// Columns: type,j,x_1..x_k,w (k is the largest type dimension).
void write_measure_csv(std::ostream& out, const SampledMeasure& mu);

}  // namespace tiebout
