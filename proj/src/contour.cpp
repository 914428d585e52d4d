#include "tiebout/contour.hpp"

#include <array>
#include <cmath>
#include <map>
#include <unordered_map>

#include "tiebout/error.hpp"

namespace tiebout {

double Polyline::length() const {
  double len = 0.0;
  for (std::size_t k = 1; k < vertices.size(); ++k) {
    len += std::hypot(vertices[k][0] - vertices[k - 1][0], vertices[k][1] - vertices[k - 1][1]);
  }
  if (closed && vertices.size() > 2) {
    len += std::hypot(vertices.front()[0] - vertices.back()[0],
                      vertices.front()[1] - vertices.back()[1]);
  }
  return len;
}

namespace {

Point refine_crossing(const ScalarField2& f, Point a, Point b, double fa) {
  for (int it = 0; it < 60; ++it) {
    Point mid{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])};
    const double fm = f(mid[0], mid[1]);
    if ((fm >= 0.0) == (fa >= 0.0)) {
      a = mid;
      fa = fm;
    } else {
      b = mid;
    }
  }
  return {0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])};
}

}  // namespace

std::vector<Polyline> zero_contour_2d(const ScalarField2& field, const Box& box,
                                      std::size_t cells, const SegmentFilter& keep) {
  require(box.dimension() == 2, "contour extraction needs a 2-D box");
  require(cells >= 2, "contour grid needs at least 2 cells per axis");
  const std::size_t nodes = cells + 1;
  const double hx = (box.hi[0] - box.lo[0]) / static_cast<double>(cells);
  const double hy = (box.hi[1] - box.lo[1]) / static_cast<double>(cells);
  auto node_x = [&](std::size_t ix) { return box.lo[0] + hx * static_cast<double>(ix); };
  auto node_y = [&](std::size_t iy) { return box.lo[1] + hy * static_cast<double>(iy); };

  std::vector<double> value(nodes * nodes);
  for (std::size_t iy = 0; iy < nodes; ++iy) {
    for (std::size_t ix = 0; ix < nodes; ++ix) value[iy * nodes + ix] = field(node_x(ix), node_y(iy));
  }
  auto positive = [&](std::size_t ix, std::size_t iy) { return value[iy * nodes + ix] >= 0.0; };

  // Horizontal edge (ix,iy)-(ix+1,iy) has id iy*cells+ix; vertical edge
  // (ix,iy)-(ix,iy+1) has id offset + iy*nodes+ix.
  const std::size_t vertical_offset = nodes * cells;
  std::unordered_map<std::size_t, Point> crossing;
  auto edge_point = [&](std::size_t id) -> const Point& {
    auto it = crossing.find(id);
    if (it != crossing.end()) return it->second;
    Point a, b;
    double fa;
    if (id < vertical_offset) {
      const std::size_t iy = id / cells, ix = id % cells;
      a = {node_x(ix), node_y(iy)};
      b = {node_x(ix + 1), node_y(iy)};
      fa = value[iy * nodes + ix];
    } else {
      const std::size_t r = id - vertical_offset;
      const std::size_t iy = r / nodes, ix = r % nodes;
      a = {node_x(ix), node_y(iy)};
      b = {node_x(ix), node_y(iy + 1)};
      fa = value[iy * nodes + ix];
    }
    return crossing.emplace(id, refine_crossing(field, a, b, fa)).first->second;
  };

  std::vector<std::array<std::size_t, 2>> segments;
  for (std::size_t iy = 0; iy < cells; ++iy) {
    for (std::size_t ix = 0; ix < cells; ++ix) {
      const bool p0 = positive(ix, iy), p1 = positive(ix + 1, iy);
      const bool p2 = positive(ix + 1, iy + 1), p3 = positive(ix, iy + 1);
      const std::size_t bottom = iy * cells + ix;
      const std::size_t top = (iy + 1) * cells + ix;
      const std::size_t left = vertical_offset + iy * nodes + ix;
      const std::size_t right = vertical_offset + iy * nodes + ix + 1;
      std::vector<std::size_t> cut;
      if (p0 != p1) cut.push_back(bottom);
      if (p1 != p2) cut.push_back(right);
      if (p3 != p2) cut.push_back(top);
      if (p0 != p3) cut.push_back(left);
      if (cut.size() == 2) {
        segments.push_back({cut[0], cut[1]});
      } else if (cut.size() == 4) {
        const double centre = field(node_x(ix) + 0.5 * hx, node_y(iy) + 0.5 * hy);
        if ((centre >= 0.0) == p0) {
          segments.push_back({bottom, right});
          segments.push_back({top, left});
        } else {
          segments.push_back({bottom, left});
          segments.push_back({right, top});
        }
      }
    }
  }

  std::vector<std::array<std::size_t, 2>> kept;
  for (const auto& s : segments) {
    const Point& a = edge_point(s[0]);
    const Point& b = edge_point(s[1]);
    if (std::hypot(a[0] - b[0], a[1] - b[1]) == 0.0) continue;
    if (!keep || keep(a, b)) kept.push_back(s);
  }

  // Chain segments through shared edge crossings.
  std::map<std::size_t, std::vector<std::size_t>> incident;
  for (std::size_t k = 0; k < kept.size(); ++k) {
    incident[kept[k][0]].push_back(k);
    incident[kept[k][1]].push_back(k);
  }
  std::vector<bool> used(kept.size(), false);
  std::vector<Polyline> out;
  auto walk = [&](std::size_t start_edge, std::size_t start_segment) {
    Polyline line;
    line.vertices.push_back(edge_point(start_edge));
    std::size_t edge = start_edge;
    std::size_t seg = start_segment;
    while (true) {
      used[seg] = true;
      const std::size_t next = kept[seg][0] == edge ? kept[seg][1] : kept[seg][0];
      line.vertices.push_back(edge_point(next));
      edge = next;
      std::size_t follow = kept.size();
      for (std::size_t cand : incident[edge]) {
        if (!used[cand]) {
          follow = cand;
          break;
        }
      }
      if (follow == kept.size()) break;
      seg = follow;
    }
    if (line.vertices.size() > 2 && edge == start_edge) {
      line.vertices.pop_back();
      line.closed = true;
    }
    out.push_back(std::move(line));
  };
  for (const auto& [edge, segs] : incident) {
    if (segs.size() == 1 && !used[segs[0]]) walk(edge, segs[0]);
  }
  for (std::size_t k = 0; k < kept.size(); ++k) {
    if (!used[k]) walk(kept[k][0], k);
  }
  return out;
}

std::vector<double> zero_crossings_1d(const std::function<double(double)>& field,
                                      double lo, double hi, std::size_t cells) {
  require(hi > lo && cells >= 1, "1-D crossing search needs a nonempty interval");
  std::vector<double> roots;
  const double h = (hi - lo) / static_cast<double>(cells);
  double xa = lo;
  double fa = field(xa);
  for (std::size_t k = 1; k <= cells; ++k) {
    const double xb = lo + h * static_cast<double>(k);
    const double fb = field(xb);
    if ((fa >= 0.0) != (fb >= 0.0)) {
      double a = xa, b = xb, va = fa;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (a + b);
        const double vm = field(mid);
        if ((vm >= 0.0) == (va >= 0.0)) {
          a = mid;
          va = vm;
        } else {
          b = mid;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    xa = xb;
    fa = fb;
  }
  return roots;
}

}  // namespace tiebout
