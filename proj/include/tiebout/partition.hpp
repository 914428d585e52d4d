#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tiebout/contour.hpp"
#include "tiebout/costs.hpp"
#include "tiebout/measure.hpp"
#include "tiebout/state.hpp"

namespace tiebout {

// One community characteristic v^i_l = calibrate( integral of H over the
// members ), optionally divided by the members' mass.
struct Characteristic {
  enum class Kind {
    constant,         // H = 1
    coordinate,       // H = x_axis
    type_share,       // H = 1 for agents of `type`
    smoothed_median,  // level where the logistic-smoothed member CDF hits 1/2
  };
  enum class Normalization { raw, mean };

  Kind kind = Kind::constant;
  Normalization normalization = Normalization::raw;
  std::size_t axis = 0;
  std::optional<std::size_t> type;  // restrict the integrand to one agent type
  double bandwidth = 0.01;          // smoothed_median only
  double scale = 1.0;               // affine calibration, then clamp to [0,1]
  double offset = 0.0;
};

struct CharacteristicsSpec {
  std::vector<std::vector<Characteristic>> per_community;

  static CharacteristicsSpec none(std::size_t communities);
  BlockLayout layout() const;
  std::size_t communities() const { return per_community.size(); }
  // Appends the share of every type other than the first to each
  // community, unless an equivalent characteristic is already declared.
  CharacteristicsSpec with_type_shares(std::size_t type_count) const;
};

// Sample points are labelled with their cost-minimizing community. Grid
// cells straddling an indifference border additionally split their mass
// between the communities in proportion to the cell volume on each side
// of the linearized cost gap, which keeps realized sizes continuous in
// the nominal state.
struct Partition {
  std::size_t communities = 0;
  std::vector<std::size_t> labels;     // per global sample
  std::vector<double> fractions;       // [sample * communities + i]
  std::vector<double> sizes;           // realized f^m, sums to 1
  std::vector<std::vector<double>> type_masses;  // [community][type]
  std::vector<double> characteristics; // realized f^v
  std::size_t tie_count = 0;

  double fraction(std::size_t sample, std::size_t i) const {
    return fractions[sample * communities + i];
  }
};

Partition assign(const CostModel& model, const SampledMeasure& mu,
                 const NominalState& state, std::size_t threads = 1);

std::vector<double> size_map(const CostModel& model, const SampledMeasure& mu,
                             const NominalState& state, std::size_t threads = 1);

// Quadrature of each integrand against the partition's membership masses.
// Mean-normalized values divide by max(member mass, guard); a mean over a
// community with no mass at all is an error.
std::vector<double> realized_characteristics(const Partition& partition,
                                             const CharacteristicsSpec& spec,
                                             const SampledMeasure& mu,
                                             double guard = 0.0);

struct BorderVertex {
  Point x;
  double density = 0.0;
  double gradient_gap = 0.0;
  double arc_weight = 0.0;
};

// Border between communities i and j: polylines in 2-D, isolated points in
// 1-D (each with arc weight 1).
struct Border {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t dimension = 2;
  std::vector<std::vector<BorderVertex>> chains;

  double length() const;
  std::size_t vertex_count() const;
};

struct BorderOptions {
  std::size_t resolution = 201;  // cells per axis of the evaluation grid
  double min_gradient_gap = 1e-8;
  double adjacency_tolerance = 1e-9;
};

// Throws empty_border when the two communities do not touch and
// degenerate_gradient when the gradient gap vanishes at a vertex.
Border extract_border(const CostModel& model, const SampledMeasure& mu,
                      const NominalState& state, std::size_t i, std::size_t j,
                      const BorderOptions& options = {});

struct IndifferenceLocus {
  enum class Kind { line, hyperbola, ray, empty };
  Kind kind = Kind::empty;
  double price_difference = 0.0;
  std::vector<Polyline> polylines;
};

std::string to_string(IndifferenceLocus::Kind kind);

// Agents indifferent between two Euclidean-distance communities whose
// prices differ by delta_p: ||x - c1|| - ||x - c2|| = delta_p, on `box`.
IndifferenceLocus indifference_locus(const Point& c1, const Point& c2, double delta_p,
                                     const Box& box, std::size_t resolution = 200);

}  // namespace tiebout
