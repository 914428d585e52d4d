#include "tiebout/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tiebout/cell_quadrature.hpp"
#include "tiebout/error.hpp"
#include "tiebout/parallel.hpp"

namespace tiebout {

CharacteristicsSpec CharacteristicsSpec::none(std::size_t communities) {
  CharacteristicsSpec spec;
  spec.per_community.resize(communities);
  return spec;
}

BlockLayout CharacteristicsSpec::layout() const {
  std::vector<std::size_t> sizes;
  for (const auto& c : per_community) sizes.push_back(c.size());
  return BlockLayout::from_sizes(sizes);
}

CharacteristicsSpec CharacteristicsSpec::with_type_shares(std::size_t type_count) const {
  CharacteristicsSpec out = *this;
  for (auto& block : out.per_community) {
    for (std::size_t t = 1; t < type_count; ++t) {
      const bool present = std::any_of(block.begin(), block.end(), [&](const Characteristic& c) {
        return c.kind == Characteristic::Kind::type_share && c.type == t &&
               c.normalization == Characteristic::Normalization::mean;
      });
      if (present) continue;
      Characteristic share;
      share.kind = Characteristic::Kind::type_share;
      share.normalization = Characteristic::Normalization::mean;
      share.type = t;
      block.push_back(share);
    }
  }
  return out;
}

Partition assign(const CostModel& model, const SampledMeasure& mu,
                 const NominalState& state, std::size_t threads) {
  const std::size_t n = model.communities();
  require(state.m.size() == n, "state and cost model disagree on the community count");
  Partition p;
  p.communities = n;
  p.labels.resize(mu.size());
  p.fractions.assign(mu.size() * n, 0.0);
  std::vector<unsigned char> tied(mu.size(), 0);

  for (std::size_t j = 0; j < mu.type_count(); ++j) {
    const auto& t = mu.type(j);
    const std::size_t base = mu.offset(j);
    const std::size_t k = t.dimension();
    constexpr std::size_t chunk = 512;
    const std::size_t chunks = (t.size() + chunk - 1) / chunk;
    parallel_for(chunks, threads, [&](std::size_t c) {
      std::vector<double> cost(n);
      std::vector<std::optional<Point>> grad(n);
      Point spread(k);
      const std::size_t end = std::min(t.size(), (c + 1) * chunk);
      for (std::size_t s = c * chunk; s < end; ++s) {
        auto x = t.point(s);
        std::size_t best = 0;
        for (std::size_t i = 0; i < n; ++i) {
          cost[i] = model.eval(j, i, x, state);
          if (cost[i] < cost[best]) best = i;
        }
        for (std::size_t i = 0; i < n; ++i) {
          if (i != best && cost[i] == cost[best]) tied[base + s] = 1;
        }
        p.labels[base + s] = best;
        double* frac = &p.fractions[(base + s) * n];
        if (!t.has_cells() || n == 1) {
          frac[best] = 1.0;
          continue;
        }
        for (std::size_t i = 0; i < n; ++i) grad[i] = model.try_grad_x(j, i, x, state);
        double moved = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (i == best) continue;
          double reach = 0.0;
          for (std::size_t a = 0; a < k; ++a) {
            spread[a] = (grad[i] && grad[best])
                            ? ((*grad[i])[a] - (*grad[best])[a]) * t.half_widths[a]
                            : 0.0;
            reach += std::abs(spread[a]);
          }
          const double gap = cost[i] - cost[best];
          if (gap >= reach) continue;
          frac[i] = linear_cell_fraction_below(gap, spread, 0.0);
          moved += frac[i];
        }
        if (moved > 1.0) {
          for (std::size_t i = 0; i < n; ++i) frac[i] /= moved;
          moved = 1.0;
        }
        frac[best] = 1.0 - moved;
      }
    });
  }

  // Fixed-order reductions.
  p.sizes.assign(n, 0.0);
  p.type_masses.assign(n, std::vector<double>(mu.type_count(), 0.0));
  for (std::size_t j = 0; j < mu.type_count(); ++j) {
    const auto& t = mu.type(j);
    const std::size_t base = mu.offset(j);
    for (std::size_t s = 0; s < t.size(); ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        const double f = p.fractions[(base + s) * n + i];
        if (f != 0.0) p.type_masses[i][j] += t.weights[s] * f;
      }
      p.tie_count += tied[base + s];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    p.sizes[i] = std::accumulate(p.type_masses[i].begin(), p.type_masses[i].end(), 0.0);
  }
  return p;
}

std::vector<double> size_map(const CostModel& model, const SampledMeasure& mu,
                             const NominalState& state, std::size_t threads) {
  return assign(model, mu, state, threads).sizes;
}

namespace {

double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }

bool integrand_applies(const Characteristic& c, std::size_t type) {
  if (c.kind == Characteristic::Kind::type_share) return c.type && *c.type == type;
  return !c.type || *c.type == type;
}

double member_mass(const Partition& p, const SampledMeasure& mu, std::size_t i,
                   const Characteristic& c) {
  double mass = 0.0;
  for (std::size_t j = 0; j < mu.type_count(); ++j) {
    if (c.kind != Characteristic::Kind::type_share && c.type && *c.type != j) continue;
    mass += p.type_masses[i][j];
  }
  return mass;
}

double smoothed_median(const Partition& p, const SampledMeasure& mu, std::size_t i,
                       const Characteristic& c, double mass) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t j = 0; j < mu.type_count(); ++j) {
    if (!integrand_applies(c, j)) continue;
    const auto& bounds = mu.type(j).space.support.bounds;
    require(c.axis < bounds.dimension(), "median axis exceeds the type dimension");
    lo = std::min(lo, bounds.lo[c.axis]);
    hi = std::max(hi, bounds.hi[c.axis]);
  }
  lo -= 8.0 * c.bandwidth;
  hi += 8.0 * c.bandwidth;
  auto below = [&](double level) {
    double acc = 0.0;
    for (std::size_t j = 0; j < mu.type_count(); ++j) {
      if (!integrand_applies(c, j)) continue;
      const auto& t = mu.type(j);
      const std::size_t base = mu.offset(j);
      for (std::size_t s = 0; s < t.size(); ++s) {
        const double f = p.fraction(base + s, i);
        if (f == 0.0) continue;
        acc += t.weights[s] * f * logistic((level - t.point(s)[c.axis]) / c.bandwidth);
      }
    }
    return acc;
  };
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (below(mid) < 0.5 * mass) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> realized_characteristics(const Partition& partition,
                                             const CharacteristicsSpec& spec,
                                             const SampledMeasure& mu, double guard) {
  require(spec.communities() == partition.communities,
          "characteristics spec and partition disagree on the community count");
  std::vector<double> out;
  for (std::size_t i = 0; i < spec.communities(); ++i) {
    for (const auto& c : spec.per_community[i]) {
      const double mass = member_mass(partition, mu, i, c);
      const bool mean = c.normalization == Characteristic::Normalization::mean ||
                        c.kind == Characteristic::Kind::smoothed_median;
      if (mean && mass == 0.0) {
        fail(ErrorCode::empty_community_mean,
             "mean characteristic requested for empty community " + std::to_string(i));
      }
      double value = 0.0;
      if (c.kind == Characteristic::Kind::smoothed_median) {
        value = smoothed_median(partition, mu, i, c, mass);
      } else {
        double integral = 0.0;
        for (std::size_t j = 0; j < mu.type_count(); ++j) {
          if (!integrand_applies(c, j)) continue;
          const auto& t = mu.type(j);
          const std::size_t base = mu.offset(j);
          if (c.kind == Characteristic::Kind::coordinate) {
            require(c.axis < t.dimension(), "coordinate axis exceeds the type dimension");
          }
          for (std::size_t s = 0; s < t.size(); ++s) {
            const double f = partition.fraction(base + s, i);
            if (f == 0.0) continue;
            const double h =
                c.kind == Characteristic::Kind::coordinate ? t.point(s)[c.axis] : 1.0;
            integral += t.weights[s] * f * h;
          }
        }
        value = mean ? integral / std::max(mass, guard) : integral;
      }
      out.push_back(std::clamp(c.scale * value + c.offset, 0.0, 1.0));
    }
  }
  return out;
}

double Border::length() const {
  double total = 0.0;
  for (const auto& chain : chains) {
    for (const auto& v : chain) total += v.arc_weight;
  }
  return total;
}

std::size_t Border::vertex_count() const {
  std::size_t count = 0;
  for (const auto& chain : chains) count += chain.size();
  return count;
}

namespace {

bool minimal_pair(const CostModel& model, const NominalState& state, PointView x,
                  std::size_t i, std::size_t j, double tolerance) {
  const double level = std::min(model.eval(0, i, x, state), model.eval(0, j, x, state));
  for (std::size_t h = 0; h < model.communities(); ++h) {
    if (h == i || h == j) continue;
    if (model.eval(0, h, x, state) < level - tolerance) return false;
  }
  return true;
}

BorderVertex annotate(const CostModel& model, const SampledMeasure& mu,
                      const NominalState& state, std::size_t i, std::size_t j, Point x,
                      double min_gap) {
  BorderVertex v;
  v.density = mu.density(0, x);
  const Point gi = model.grad_x(0, i, x, state);
  const Point gj = model.grad_x(0, j, x, state);
  double gap = 0.0;
  for (std::size_t a = 0; a < x.size(); ++a) gap += (gj[a] - gi[a]) * (gj[a] - gi[a]);
  v.gradient_gap = std::sqrt(gap);
  if (!(v.gradient_gap > min_gap)) {
    fail(ErrorCode::degenerate_gradient,
         "cost gradient gap vanishes on the border between communities " + std::to_string(i) +
             " and " + std::to_string(j));
  }
  v.x = std::move(x);
  return v;
}

}  // namespace

Border extract_border(const CostModel& model, const SampledMeasure& mu,
                      const NominalState& state, std::size_t i, std::size_t j,
                      const BorderOptions& options) {
  require(i != j && i < model.communities() && j < model.communities(),
          "border needs two distinct communities");
  require(mu.type_count() == 1, "border extraction is defined for a single agent type");
  const auto& space = mu.type(0).space;
  require(space.dimension == 1 || space.dimension == 2,
          "border extraction supports type spaces of dimension 1 or 2");
  Border border;
  border.i = i;
  border.j = j;
  border.dimension = space.dimension;
  const auto& box = space.support.bounds;

  if (space.dimension == 1) {
    auto gap = [&](double x) {
      const Point p{x};
      return model.eval(0, j, p, state) - model.eval(0, i, p, state);
    };
    for (double root : zero_crossings_1d(gap, box.lo[0], box.hi[0], options.resolution)) {
      Point x{root};
      if (!space.support.contains(x)) continue;
      if (!minimal_pair(model, state, x, i, j, options.adjacency_tolerance)) continue;
      auto v = annotate(model, mu, state, i, j, std::move(x), options.min_gradient_gap);
      v.arc_weight = 1.0;
      border.chains.push_back({std::move(v)});
    }
  } else {
    auto gap = [&](double x, double y) {
      const Point p{x, y};
      return model.eval(0, j, p, state) - model.eval(0, i, p, state);
    };
    auto keep = [&](const Point& a, const Point& b) {
      const Point mid{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])};
      return space.support.contains(mid) &&
             minimal_pair(model, state, mid, i, j, options.adjacency_tolerance);
    };
    for (const auto& line : zero_contour_2d(gap, box, options.resolution, keep)) {
      std::vector<BorderVertex> chain;
      const std::size_t count = line.vertices.size();
      for (std::size_t k = 0; k < count; ++k) {
        chain.push_back(annotate(model, mu, state, i, j, line.vertices[k],
                                 options.min_gradient_gap));
      }
      // Trapezoid weights: half of each adjacent segment.
      auto seg = [&](std::size_t a, std::size_t b) {
        return std::hypot(chain[a].x[0] - chain[b].x[0], chain[a].x[1] - chain[b].x[1]);
      };
      for (std::size_t k = 0; k + 1 < count; ++k) {
        const double len = seg(k, k + 1);
        chain[k].arc_weight += 0.5 * len;
        chain[k + 1].arc_weight += 0.5 * len;
      }
      if (line.closed && count > 2) {
        const double len = seg(count - 1, 0);
        chain[count - 1].arc_weight += 0.5 * len;
        chain[0].arc_weight += 0.5 * len;
      }
      border.chains.push_back(std::move(chain));
    }
  }
  if (border.chains.empty()) {
    fail(ErrorCode::empty_border, "communities " + std::to_string(i) + " and " +
                                      std::to_string(j) + " share no border");
  }
  return border;
}

std::string to_string(IndifferenceLocus::Kind kind) {
  switch (kind) {
    case IndifferenceLocus::Kind::line: return "line";
    case IndifferenceLocus::Kind::hyperbola: return "hyperbola";
    case IndifferenceLocus::Kind::ray: return "ray";
    case IndifferenceLocus::Kind::empty: return "empty";
  }
  return "empty";
}

IndifferenceLocus indifference_locus(const Point& c1, const Point& c2, double delta_p,
                                     const Box& box, std::size_t resolution) {
  require(c1.size() == 2 && c2.size() == 2 && box.dimension() == 2,
          "indifference loci are drawn in the plane");
  IndifferenceLocus locus;
  locus.price_difference = delta_p;
  const double d = std::hypot(c1[0] - c2[0], c1[1] - c2[1]);
  require(d > 0.0, "indifference locus needs distinct centers");
  const double tol = 1e-9 * std::max(1.0, d);
  if (std::abs(delta_p) > d + tol) {
    locus.kind = IndifferenceLocus::Kind::empty;
    return locus;
  }
  if (std::abs(std::abs(delta_p) - d) <= tol) {
    // Everything on the center line beyond the nearer focus is indifferent.
    const Point& from = delta_p > 0 ? c1 : c2;
    const Point& start = delta_p > 0 ? c2 : c1;
    const double ux = (start[0] - from[0]) / d, uy = (start[1] - from[1]) / d;
    double t_lo = 0.0, t_hi = std::numeric_limits<double>::infinity();
    const double p[2] = {start[0], start[1]};
    const double u[2] = {ux, uy};
    for (int a = 0; a < 2; ++a) {
      if (u[a] == 0.0) {
        if (p[a] < box.lo[a] || p[a] > box.hi[a]) t_hi = -1.0;
        continue;
      }
      double t1 = (box.lo[a] - p[a]) / u[a], t2 = (box.hi[a] - p[a]) / u[a];
      if (t1 > t2) std::swap(t1, t2);
      t_lo = std::max(t_lo, t1);
      t_hi = std::min(t_hi, t2);
    }
    locus.kind = IndifferenceLocus::Kind::ray;
    if (t_hi > t_lo) {
      Polyline ray;
      ray.vertices.push_back({p[0] + t_lo * ux, p[1] + t_lo * uy});
      ray.vertices.push_back({p[0] + t_hi * ux, p[1] + t_hi * uy});
      locus.polylines.push_back(std::move(ray));
    }
    return locus;
  }
  auto field = [&](double x, double y) {
    return std::hypot(x - c1[0], y - c1[1]) - std::hypot(x - c2[0], y - c2[1]) - delta_p;
  };
  locus.polylines = zero_contour_2d(field, box, resolution);
  locus.kind = delta_p == 0.0 ? IndifferenceLocus::Kind::line : IndifferenceLocus::Kind::hyperbola;
  return locus;
}

}  // namespace tiebout
