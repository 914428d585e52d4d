#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "tiebout/measure.hpp"

namespace tiebout {

struct Polyline {
  std::vector<Point> vertices;
  bool closed = false;

  double length() const;
};

using ScalarField2 = std::function<double(double, double)>;
using SegmentFilter = std::function<bool(const Point& a, const Point& b)>;

// Marching squares on a (cells+1)^2 node grid over `box`. Crossings are
// refined by bisection of `field` along each grid edge, so vertices lie on
// the true zero set to near machine precision. Segments rejected by
// `keep` are dropped before chaining into polylines.
std::vector<Polyline> zero_contour_2d(const ScalarField2& field, const Box& box,
                                      std::size_t cells,
                                      const SegmentFilter& keep = {});

// Sign changes of a 1-D field on a uniform grid, refined by bisection.
std::vector<double> zero_crossings_1d(const std::function<double(double)>& field,
                                      double lo, double hi, std::size_t cells);

}  // namespace tiebout
