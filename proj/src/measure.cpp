#include "tiebout/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "tiebout/error.hpp"
#include "tiebout/random.hpp"

namespace tiebout {

bool Box::contains(PointView x) const {
  for (std::size_t a = 0; a < lo.size(); ++a) {
    if (x[a] < lo[a] || x[a] > hi[a]) return false;
  }
  return true;
}

double Box::volume() const {
  double v = 1.0;
  for (std::size_t a = 0; a < lo.size(); ++a) v *= hi[a] - lo[a];
  return v;
}

Support box_support(Box bounds) {
  Support s;
  s.bounds = std::move(bounds);
  return s;
}

Support ball_support(Point center, double radius) {
  require(radius > 0.0, "ball support needs a positive radius");
  Support s;
  s.bounds.lo = center;
  s.bounds.hi = center;
  for (std::size_t a = 0; a < center.size(); ++a) {
    s.bounds.lo[a] -= radius;
    s.bounds.hi[a] += radius;
  }
  s.predicate = [center, r2 = radius * radius](PointView x) {
    double d2 = 0.0;
    for (std::size_t a = 0; a < center.size(); ++a) {
      d2 += (x[a] - center[a]) * (x[a] - center[a]);
    }
    return d2 <= r2;
  };
  s.description = "ball";
  return s;
}

namespace {

double tabulated_value(const DensitySpec& d, PointView x) {
  const std::size_t k = d.nodes.size();
  // Locate the enclosing node cell per axis.
  std::vector<std::size_t> base(k);
  std::vector<double> frac(k);
  for (std::size_t a = 0; a < k; ++a) {
    const auto& ax = d.nodes[a];
    if (x[a] < ax.front() || x[a] > ax.back()) return 0.0;
    if (ax.size() == 1) {
      base[a] = 0;
      frac[a] = 0.0;
      continue;
    }
    auto it = std::upper_bound(ax.begin(), ax.end(), x[a]);
    std::size_t hi = std::min<std::size_t>(it - ax.begin(), ax.size() - 1);
    std::size_t lo = hi - 1;
    base[a] = lo;
    frac[a] = (x[a] - ax[lo]) / (ax[hi] - ax[lo]);
  }
  double value = 0.0;
  for (std::size_t corner = 0; corner < (std::size_t{1} << k); ++corner) {
    double weight = 1.0;
    std::size_t flat = 0;
    for (std::size_t a = 0; a < k; ++a) {
      const bool up = (corner >> a) & 1U;
      const std::size_t idx =
          std::min(base[a] + (up ? 1 : 0), d.nodes[a].size() - 1);
      weight *= up ? frac[a] : 1.0 - frac[a];
      flat = flat * d.nodes[a].size() + idx;
    }
    if (weight != 0.0) value += weight * d.values[flat];
  }
  return value;
}

}  // namespace

double DensitySpec::operator()(PointView x) const {
  switch (kind) {
    case Kind::uniform:
      return 1.0;
    case Kind::piecewise_constant:
      for (const auto& p : pieces) {
        if (p.box.contains(x)) return p.value;
      }
      return background;
    case Kind::tabulated:
      return tabulated_value(*this, x);
  }
  return 0.0;
}

double DensitySpec::upper_bound() const {
  switch (kind) {
    case Kind::uniform:
      return 1.0;
    case Kind::piecewise_constant: {
      double m = background;
      for (const auto& p : pieces) m = std::max(m, p.value);
      return m;
    }
    case Kind::tabulated:
      return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
  }
  return 0.0;
}

SampledMeasure::SampledMeasure(std::vector<TypeSample> types,
                               Provenance provenance, std::uint64_t seed,
                               std::size_t resolution)
    : types_(std::move(types)),
      provenance_(provenance),
      seed_(seed),
      resolution_(resolution) {
  offsets_.assign(1, 0);
  for (const auto& t : types_) offsets_.push_back(offsets_.back() + t.size());
}

double SampledMeasure::total_mass() const {
  double total = 0.0;
  for (const auto& t : types_) {
    for (double w : t.weights) total += w;
  }
  return total;
}

double SampledMeasure::density(std::size_t j, PointView x) const {
  const auto& t = types_.at(j);
  if (!t.space.support.contains(x)) return 0.0;
  return t.density_scale * t.space.density(x);
}

namespace {

void validate_spaces(const std::vector<TypeSpace>& spaces) {
  require(!spaces.empty(), "at least one type space is required");
  double share = 0.0;
  for (std::size_t j = 0; j < spaces.size(); ++j) {
    const auto& s = spaces[j];
    require(s.dimension >= 1, "type dimension must be positive");
    require(s.support.bounds.lo.size() == s.dimension &&
                s.support.bounds.hi.size() == s.dimension,
            "support box dimension does not match the type dimension");
    for (std::size_t a = 0; a < s.dimension; ++a) {
      require(s.support.bounds.hi[a] > s.support.bounds.lo[a],
              "support box must have nonempty interior");
    }
    require(s.mass_share > 0.0 && s.mass_share <= 1.0,
            "type mass share must lie in (0, 1]");
    if (s.density.kind == DensitySpec::Kind::tabulated) {
      require(s.density.nodes.size() == s.dimension,
              "tabulated density needs one node list per axis");
      std::size_t count = 1;
      for (const auto& ax : s.density.nodes) {
        require(!ax.empty() && std::is_sorted(ax.begin(), ax.end()),
                "tabulated density nodes must be sorted and nonempty");
        count *= ax.size();
      }
      require(s.density.values.size() == count,
              "tabulated density value count does not match the node grid");
    }
    share += s.mass_share;
  }
  require(std::abs(share - 1.0) <= 1e-9, "type mass shares must sum to 1");
}

void normalize(TypeSample& t) {
  double total = 0.0;
  for (double w : t.weights) total += w;
  const double factor = t.space.mass_share / total;
  for (double& w : t.weights) w *= factor;
}

}  // namespace

SampledMeasure build_grid_measure(const std::vector<TypeSpace>& spaces,
                                  std::size_t cells_per_axis) {
  validate_spaces(spaces);
  require(cells_per_axis >= 2, "grid measure needs at least 2 cells per axis");
  std::vector<TypeSample> samples;
  for (const auto& space : spaces) {
    TypeSample t;
    t.space = space;
    const std::size_t k = space.dimension;
    const auto& box = space.support.bounds;
    Point width(k);
    t.half_widths.resize(k);
    double cell_volume = 1.0;
    for (std::size_t a = 0; a < k; ++a) {
      width[a] = (box.hi[a] - box.lo[a]) / static_cast<double>(cells_per_axis);
      t.half_widths[a] = 0.5 * width[a];
      cell_volume *= width[a];
    }
    std::vector<std::size_t> idx(k, 0);
    Point x(k);
    bool done = false;
    while (!done) {
      for (std::size_t a = 0; a < k; ++a) {
        x[a] = box.lo[a] + (static_cast<double>(idx[a]) + 0.5) * width[a];
      }
      if (space.support.contains(x)) {
        const double w = space.density(x) * cell_volume;
        if (w > 0.0) {
          t.points.insert(t.points.end(), x.begin(), x.end());
          t.weights.push_back(w);
          t.raw_mass += w;
        }
      }
      // Last axis fastest.
      std::size_t a = k;
      while (a > 0) {
        --a;
        if (++idx[a] < cells_per_axis) break;
        idx[a] = 0;
        if (a == 0) done = true;
      }
    }
    if (t.weights.empty()) {
      fail(ErrorCode::support_empty,
           "no grid cell midpoint lies in the support of type " +
               std::to_string(space.type_index));
    }
    t.density_scale = space.mass_share / t.raw_mass;
    normalize(t);
    samples.push_back(std::move(t));
  }
  return SampledMeasure(std::move(samples), SampledMeasure::Provenance::grid, 0,
                        cells_per_axis);
}

SampledMeasure build_grid_measure(const TypeSpace& space,
                                  std::size_t cells_per_axis) {
  return build_grid_measure(std::vector<TypeSpace>{space}, cells_per_axis);
}

SampledMeasure build_monte_carlo_measure(const std::vector<TypeSpace>& spaces,
                                         std::size_t n, std::uint64_t seed) {
  validate_spaces(spaces);
  require(n >= 1, "Monte-Carlo measure needs at least one draw");
  std::vector<TypeSample> samples;
  for (std::size_t j = 0; j < spaces.size(); ++j) {
    const auto& space = spaces[j];
    TypeSample t;
    t.space = space;
    const std::size_t k = space.dimension;
    const auto& box = space.support.bounds;
    const double bound = space.density.upper_bound();
    if (!(bound > 0.0)) {
      fail(ErrorCode::support_empty, "density is identically zero");
    }
    Rng rng = Rng::stream(seed, j);
    const std::size_t budget = n * 10000 + 100000;
    std::size_t trials = 0;
    std::size_t accepted = 0;
    double raw_hits = 0.0;
    Point x(k);
    while (accepted < n) {
      if (trials >= budget) {
        fail(ErrorCode::rejection_rate_exceeded,
             "rejection sampling acceptance fell below 1e-4");
      }
      ++trials;
      for (std::size_t a = 0; a < k; ++a) x[a] = rng.uniform(box.lo[a], box.hi[a]);
      const double u = rng.uniform();
      if (!space.support.contains(x)) continue;
      const double d = space.density(x);
      raw_hits += d / bound;
      if (u * bound < d) {
        t.points.insert(t.points.end(), x.begin(), x.end());
        t.weights.push_back(space.mass_share / static_cast<double>(n));
        ++accepted;
      }
    }
    // Acceptance-ratio estimate of the raw mass, used to normalize the
    // density reported at border vertices.
    t.raw_mass = box.volume() * bound * raw_hits / static_cast<double>(trials);
    t.density_scale = t.raw_mass > 0.0 ? space.mass_share / t.raw_mass : 0.0;
    samples.push_back(std::move(t));
  }
  return SampledMeasure(std::move(samples),
                        SampledMeasure::Provenance::monte_carlo, seed, n);
}

SampledMeasure build_monte_carlo_measure(const TypeSpace& space, std::size_t n,
                                         std::uint64_t seed) {
  return build_monte_carlo_measure(std::vector<TypeSpace>{space}, n, seed);
}

double measure_of(const SampledMeasure& mu, const SamplePredicate& predicate) {
  double total = 0.0;
  for (std::size_t j = 0; j < mu.type_count(); ++j) {
    const auto& t = mu.type(j);
    for (std::size_t s = 0; s < t.size(); ++s) {
      if (predicate(j, t.point(s))) total += t.weights[s];
    }
  }
  return total;
}

void write_measure_csv(std::ostream& out, const SampledMeasure& mu) {
  std::size_t k = 0;
  for (const auto& t : mu.types()) k = std::max(k, t.dimension());
  out << "type,j";
  for (std::size_t a = 0; a < k; ++a) out << ",x_" << (a + 1);
  out << ",w\n";
  out.precision(17);
  for (std::size_t j = 0; j < mu.type_count(); ++j) {
    const auto& t = mu.type(j);
    for (std::size_t s = 0; s < t.size(); ++s) {
      out << j << ',' << s;
      auto x = t.point(s);
      for (std::size_t a = 0; a < k; ++a) {
        out << ',';
        if (a < x.size()) out << x[a];
      }
      out << ',' << t.weights[s] << '\n';
    }
  }
}

}  // namespace tiebout
