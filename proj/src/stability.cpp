#include "tiebout/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tiebout/error.hpp"
#include "tiebout/parallel.hpp"
#include "tiebout/random.hpp"

namespace tiebout {

namespace {

struct SampleRef {
  std::size_t type;
  std::size_t local;
};

SampleRef locate(const SampledMeasure& mu, std::size_t global) {
  std::size_t j = 0;
  while (j + 1 < mu.type_count() && mu.offset(j + 1) <= global) ++j;
  return {j, global - mu.offset(j)};
}

double distance(PointView a, PointView b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(d);
}

// Per-sample costs of every community at the equilibrium state.
std::vector<double> cost_table(const CostModel& model, const SampledMeasure& mu,
                               const NominalState& state, std::size_t threads) {
  const std::size_t n = model.communities();
  std::vector<double> table(mu.size() * n);
  for (std::size_t j = 0; j < mu.type_count(); ++j) {
    const auto& t = mu.type(j);
    const std::size_t base = mu.offset(j);
    parallel_for(t.size(), threads, [&](std::size_t s) {
      for (std::size_t i = 0; i < n; ++i) {
        table[(base + s) * n + i] = model.eval(j, i, t.point(s), state);
      }
    });
  }
  return table;
}

}  // namespace

DeviationCheck verify_deviation(const CostModel& model, const SampledMeasure& mu,
                                const EquilibriumReport& eq,
                                const DeviationCandidate& candidate) {
  DeviationCheck check;
  if (candidate.members.empty() || candidate.mass <= 0.0) {
    check.worst_member_gain = -std::numeric_limits<double>::infinity();
    return check;
  }
  const std::size_t i = candidate.source, j = candidate.target;
  NominalState moved = eq.state;
  moved.m[i] = std::max(moved.m[i] - candidate.mass, 1e-300);
  moved.m[j] += candidate.mass;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t global : candidate.members) {
    const auto ref = locate(mu, global);
    const auto& t = mu.type(ref.type);
    auto x = t.point(ref.local);
    double gain = model.eval(ref.type, i, x, eq.state) - model.eval(ref.type, j, x, moved);
    if (t.has_cells()) {
      const auto gi = model.try_grad_x(ref.type, i, x, eq.state);
      const auto gj = model.try_grad_x(ref.type, j, x, moved);
      if (gi && gj) {
        for (std::size_t a = 0; a < t.dimension(); ++a) {
          gain -= std::abs((*gi)[a] - (*gj)[a]) * t.half_widths[a];
        }
      }
    }
    check.gains.push_back(gain);
    worst = std::min(worst, gain);
  }
  check.worst_member_gain = worst;
  check.profitable = worst > 0.0;
  return check;
}

std::vector<Border> adjacent_borders(const CostModel& model, const SampledMeasure& mu,
                                     const EquilibriumReport& eq, const BorderOptions& options) {
  std::vector<Border> out;
  const std::size_t n = model.communities();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      try {
        out.push_back(extract_border(model, mu, eq.state, i, j, options));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::empty_border) throw;
      }
    }
  }
  return out;
}

namespace {

struct VertexRef {
  std::size_t border;
  std::size_t chain;
  std::size_t vertex;
};

std::optional<DeviationCandidate> ball_candidate(const CostModel& model,
                                                 const SampledMeasure& mu,
                                                 const EquilibriumReport& eq,
                                                 const std::vector<double>& costs,
                                                 const Border& border, const BorderVertex& v,
                                                 double radius, Rng& rng) {
  const std::size_t n = model.communities();
  const bool forward = rng.uniform() < 0.5;
  const std::size_t source = forward ? border.i : border.j;
  const std::size_t target = forward ? border.j : border.i;
  // Ball centre near the border vertex; band depth up to the cost spread
  // across the ball.
  Point centre = v.x;
  const std::size_t k = centre.size();
  if (k == 1) {
    centre[0] += rng.uniform(-0.5, 0.5) * radius;
  } else {
    const double r = 0.5 * radius * std::sqrt(rng.uniform());
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    centre[0] += r * std::cos(angle);
    centre[1] += r * std::sin(angle);
  }
  const double band = (1.0 - rng.uniform()) * v.gradient_gap * radius;
  DeviationCandidate c;
  c.source = source;
  c.target = target;
  c.origin = "ball";
  for (std::size_t jt = 0; jt < mu.type_count(); ++jt) {
    const auto& t = mu.type(jt);
    if (t.dimension() != k) continue;
    const std::size_t base = mu.offset(jt);
    for (std::size_t s = 0; s < t.size(); ++s) {
      const std::size_t g = base + s;
      const double f = eq.partition.fraction(g, source);
      if (f <= 0.0) continue;
      if (costs[g * n + target] - costs[g * n + source] > band) continue;
      if (distance(t.point(s), centre) > radius) continue;
      c.members.push_back(g);
      c.member_mass.push_back(t.weights[s] * f);
      c.mass += t.weights[s] * f;
    }
  }
  if (c.members.empty()) return std::nullopt;
  return c;
}

}  // namespace

WeakSearchResult weak_stability_search(const CostModel& model, const SampledMeasure& mu,
                                       const EquilibriumReport& eq, double radius,
                                       std::size_t trials, std::uint64_t seed,
                                       double min_radius, std::size_t threads,
                                       const BorderOptions& options) {
  require(radius > 0.0, "ball radius must be positive");
  WeakSearchResult result;
  result.requested_radius = radius;
  result.trials = trials;
  const auto borders = adjacent_borders(model, mu, eq, options);
  if (borders.empty()) {
    result.certified_radius = radius;
    result.notes.push_back("no adjacent communities: no bilateral deviation exists");
    return result;
  }
  if (borders.front().dimension == 1) {
    result.notes.push_back(
        "one-dimensional type space: per-member gains and losses are of the same order, "
        "so weak stability is not implied by equilibrium");
  }
  std::vector<VertexRef> vertices;
  std::vector<double> cumulative;
  double total = 0.0;
  for (std::size_t b = 0; b < borders.size(); ++b) {
    for (std::size_t c = 0; c < borders[b].chains.size(); ++c) {
      for (std::size_t v = 0; v < borders[b].chains[c].size(); ++v) {
        total += borders[b].chains[c][v].arc_weight;
        vertices.push_back({b, c, v});
        cumulative.push_back(total);
      }
    }
  }
  const auto costs = cost_table(model, mu, eq.state, threads);

  std::size_t round = 0;
  for (double r = radius; r >= min_radius * (1.0 - 1e-12); r *= 0.5, ++round) {
    std::vector<std::optional<DeviationCandidate>> hits(trials);
    std::vector<std::optional<DeviationCheck>> checks(trials);
    parallel_for(trials, threads, [&](std::size_t trial) {
      Rng rng = Rng::stream(seed + 1000003ULL * round, trial);
      const double pick = rng.uniform() * total;
      const std::size_t idx = std::min<std::size_t>(
          std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin(),
          vertices.size() - 1);
      const auto& ref = vertices[idx];
      const Border& border = borders[ref.border];
      auto candidate = ball_candidate(model, mu, eq, costs, border,
                                      border.chains[ref.chain][ref.vertex], r, rng);
      if (!candidate) return;
      auto check = verify_deviation(model, mu, eq, *candidate);
      if (check.profitable) {
        hits[trial] = std::move(candidate);
        checks[trial] = std::move(check);
      }
    });
    std::size_t count = 0;
    std::size_t first = trials;
    for (std::size_t t = 0; t < trials; ++t) {
      if (hits[t]) {
        ++count;
        first = std::min(first, t);
      }
    }
    if (round == 0) {
      result.hits_at_requested = count;
      if (count > 0) {
        result.counterexample = hits[first];
        result.counterexample_check = checks[first];
      }
    }
    if (count == 0) {
      result.certified_radius = r;
      break;
    }
    if (min_radius <= 0.0) break;
  }
  result.stable = result.certified_radius > 0.0;
  if (result.stable && result.certified_radius < radius) {
    result.notes.push_back("profitable deviations exist in balls of the requested radius; "
                           "none found at the certified radius");
  }
  return result;
}

namespace {

double point_term(const BorderVertex& v) { return v.density / v.gradient_gap * v.arc_weight; }

}  // namespace

StrongCondition strong_stability_condition(const CostModel& model, const SampledMeasure& /*mu*/,
                                           const EquilibriumReport& eq, const Border& border,
                                           std::size_t i, std::size_t j) {
  require((border.i == i && border.j == j) || (border.i == j && border.j == i),
          "border does not belong to the requested pair");
  StrongCondition c;
  c.i = i;
  c.j = j;
  c.point_border = border.dimension == 1;
  auto scale_at = [&](const Point& y) {
    const double d = model.dcost_dm(0, j, y, eq.state);
    require(d < 0.0, "cost must decrease in the community size on the border");
    return 1.0 / d;
  };
  double whole = 0.0;
  for (const auto& chain : border.chains) {
    for (const auto& v : chain) whole += point_term(v);
  }
  const Point& first = border.chains.front().front().x;
  if (model.flags().separable) {
    c.integral = whole;
    c.y = first;
    c.scale_term = scale_at(first);
    c.sum = c.integral + c.scale_term;
    c.satisfied = c.sum < 0.0;
    return c;
  }

  // Non-separable: every window must admit a member y making the sum negative.
  c.windowed = true;
  c.windows = 0;
  c.sum = -std::numeric_limits<double>::infinity();
  auto consider = [&](const std::vector<const BorderVertex*>& window) {
    if (window.empty()) return;
    double integral = 0.0;
    double best_scale = 0.0;
    const Point* best_y = nullptr;
    for (const auto* v : window) {
      integral += point_term(*v);
      const double s = scale_at(v->x);
      if (best_y == nullptr || s < best_scale) {
        best_scale = s;
        best_y = &v->x;
      }
    }
    ++c.windows;
    const double sum = integral + best_scale;
    if (sum > c.sum) {
      c.sum = sum;
      c.integral = integral;
      c.scale_term = best_scale;
      c.y = *best_y;
    }
  };
  std::vector<const BorderVertex*> all;
  for (const auto& chain : border.chains) {
    for (const auto& v : chain) all.push_back(&v);
  }
  consider(all);
  for (const auto& chain : border.chains) {
    std::vector<double> position(chain.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < chain.size(); ++k) {
      acc += chain[k].arc_weight;
      position[k] = acc - 0.5 * chain[k].arc_weight;
    }
    const double length = acc;
    for (double fraction : {1.0, 0.5, 0.25, 0.125}) {
      const double width = fraction * length;
      for (double start = 0.0; start + width <= length * (1.0 + 1e-12); start += 0.5 * width) {
        std::vector<const BorderVertex*> window;
        for (std::size_t k = 0; k < chain.size(); ++k) {
          if (position[k] >= start && position[k] <= start + width) window.push_back(&chain[k]);
        }
        consider(window);
      }
    }
  }
  c.satisfied = c.sum < 0.0;
  return c;
}

StrongCondition strong_stability_condition(const CostModel& model, const SampledMeasure& mu,
                                           const EquilibriumReport& eq, std::size_t i,
                                           std::size_t j, const BorderOptions& options) {
  const Border border = extract_border(model, mu, eq.state, std::min(i, j), std::max(i, j),
                                       options);
  return strong_stability_condition(model, mu, eq, border, i, j);
}

namespace {

struct Direction {
  std::size_t border;
  std::size_t source;
  std::size_t target;
  // Source samples ordered by cost gap to the target, nearest first.
  std::vector<std::size_t> order;
  std::vector<double> gap;
  std::vector<double> mass;
  std::vector<std::size_t> nearest;  // flat vertex index into the border
};

DeviationCandidate fill_to_mass(const Direction& d, double eps_mass,
                                const std::vector<bool>* allowed, std::string origin) {
  DeviationCandidate c;
  c.source = d.source;
  c.target = d.target;
  c.origin = std::move(origin);
  for (std::size_t k = 0; k < d.order.size() && c.mass < eps_mass; ++k) {
    if (allowed != nullptr && !(*allowed)[d.nearest[k]]) continue;
    c.members.push_back(d.order[k]);
    c.member_mass.push_back(d.mass[k]);
    c.mass += d.mass[k];
  }
  return c;
}

}  // namespace

StrongSearchResult strong_stability_search(const CostModel& model, const SampledMeasure& mu,
                                           const EquilibriumReport& eq, double eps_mass,
                                           std::size_t trials, std::uint64_t seed,
                                           std::size_t threads, const BorderOptions& options) {
  require(eps_mass > 0.0, "deviation mass must be positive");
  StrongSearchResult result;
  double smallest = std::numeric_limits<double>::infinity();
  for (const auto& t : mu.types()) {
    for (double w : t.weights) smallest = std::min(smallest, w);
  }
  if (eps_mass < smallest) {
    result.vacuous = true;
    result.warning = "deviation mass is below one sample weight; the search is vacuous at "
                     "this resolution";
    return result;
  }
  const auto borders = adjacent_borders(model, mu, eq, options);
  const std::size_t n = model.communities();
  const auto costs = cost_table(model, mu, eq.state, threads);

  std::vector<Direction> directions;
  for (std::size_t b = 0; b < borders.size(); ++b) {
    std::vector<const BorderVertex*> flat;
    for (const auto& chain : borders[b].chains) {
      for (const auto& v : chain) flat.push_back(&v);
    }
    for (int dir = 0; dir < 2; ++dir) {
      Direction d;
      d.border = b;
      d.source = dir == 0 ? borders[b].i : borders[b].j;
      d.target = dir == 0 ? borders[b].j : borders[b].i;
      std::vector<std::pair<double, std::size_t>> keyed;
      for (std::size_t g = 0; g < mu.size(); ++g) {
        if (eq.partition.fraction(g, d.source) <= 0.0) continue;
        keyed.emplace_back(costs[g * n + d.target] - costs[g * n + d.source], g);
      }
      std::sort(keyed.begin(), keyed.end());
      // Keep the band holding up to eight strips' worth of mass.
      double acc = 0.0;
      for (const auto& [gap, g] : keyed) {
        if (acc >= 8.0 * eps_mass) break;
        const auto ref = locate(mu, g);
        const double m = mu.type(ref.type).weights[ref.local] * eq.partition.fraction(g, d.source);
        d.order.push_back(g);
        d.gap.push_back(gap);
        d.mass.push_back(m);
        acc += m;
        auto x = mu.type(ref.type).point(ref.local);
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t v = 0; v < flat.size(); ++v) {
          const double dist = x.size() == flat[v]->x.size() ? distance(x, flat[v]->x) : 0.0;
          if (dist < best_d) {
            best_d = dist;
            best = v;
          }
        }
        d.nearest.push_back(best);
      }
      directions.push_back(std::move(d));
    }
  }

  // Full-border strips first, in a fixed order.
  for (const auto& d : directions) {
    auto c = fill_to_mass(d, eps_mass, nullptr, "border-strip");
    if (c.members.empty()) continue;
    ++result.candidates_tested;
    auto check = verify_deviation(model, mu, eq, c);
    if (check.profitable) {
      result.found = true;
      result.counterexample = std::move(c);
      result.counterexample_check = std::move(check);
      return result;
    }
  }
  if (directions.empty()) return result;

  std::vector<std::optional<DeviationCandidate>> hits(trials);
  std::vector<std::optional<DeviationCheck>> checks(trials);
  std::vector<unsigned char> tested(trials, 0);
  parallel_for(trials, threads, [&](std::size_t trial) {
    Rng rng = Rng::stream(seed, trial);
    const Direction& d = directions[rng.index(directions.size())];
    const Border& border = borders[d.border];
    // Contiguous window on one chain, measured in arc length.
    const std::size_t chain_index = rng.index(border.chains.size());
    std::size_t offset = 0;
    for (std::size_t c = 0; c < chain_index; ++c) offset += border.chains[c].size();
    const auto& chain = border.chains[chain_index];
    std::vector<double> position(chain.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < chain.size(); ++k) {
      acc += chain[k].arc_weight;
      position[k] = acc - 0.5 * chain[k].arc_weight;
    }
    const double centre = rng.uniform() * acc;
    const double half = rng.uniform(0.05, 0.5) * acc;
    std::vector<bool> allowed(border.vertex_count(), false);
    for (std::size_t k = 0; k < chain.size(); ++k) {
      if (std::abs(position[k] - centre) <= half) allowed[offset + k] = true;
    }
    auto c = fill_to_mass(d, eps_mass, &allowed, "border-window");
    if (c.members.empty()) return;
    tested[trial] = 1;
    auto check = verify_deviation(model, mu, eq, c);
    if (check.profitable) {
      hits[trial] = std::move(c);
      checks[trial] = std::move(check);
    }
  });
  for (std::size_t t = 0; t < trials; ++t) {
    result.candidates_tested += tested[t];
    if (hits[t] && !result.found) {
      result.found = true;
      result.counterexample = std::move(hits[t]);
      result.counterexample_check = std::move(checks[t]);
    }
  }
  return result;
}

std::string to_string(Classification c) {
  switch (c) {
    case Classification::unstable: return "unstable";
    case Classification::weakly_stable_only: return "weakly-stable-only";
    case Classification::strongly_stable: return "strongly-stable";
  }
  return "unstable";
}

StabilityVerdict classify_stability(const CostModel& model, const SampledMeasure& mu,
                                    const EquilibriumReport& eq,
                                    const StabilitySettings& settings) {
  StabilityVerdict verdict;
  verdict.weak = weak_stability_search(model, mu, eq, settings.eps_ball, settings.weak_trials,
                                       settings.seed, settings.min_ball, settings.threads,
                                       settings.borders);
  const auto borders = adjacent_borders(model, mu, eq, settings.borders);
  bool all_satisfied = true;
  for (const auto& border : borders) {
    for (int dir = 0; dir < 2; ++dir) {
      const std::size_t i = dir == 0 ? border.i : border.j;
      const std::size_t j = dir == 0 ? border.j : border.i;
      auto c = strong_stability_condition(model, mu, eq, border, i, j);
      all_satisfied = all_satisfied && c.satisfied;
      verdict.conditions.push_back(std::move(c));
    }
  }
  verdict.strong = strong_stability_search(model, mu, eq, settings.eps_mass,
                                           settings.strong_trials, settings.seed + 1,
                                           settings.threads, settings.borders);
  if (!verdict.weak.stable) {
    verdict.classification = Classification::unstable;
  } else if (all_satisfied && !verdict.strong.found) {
    verdict.classification = Classification::strongly_stable;
  } else {
    verdict.classification = Classification::weakly_stable_only;
  }
  if (!borders.empty() && borders.front().dimension == 1) {
    verdict.notes.push_back("one-dimensional border: the border integral is the point value "
                            "density / |gradient gap| at each indifference point");
  }
  if (!model.flags().separable) {
    verdict.notes.push_back("non-separable costs: condition evaluated on contiguous border "
                            "windows, taking in each window the member with the largest "
                            "|1 / (d c_j / d m_j)|");
  }
  if (!verdict.weak.stable && !borders.empty() && borders.front().dimension >= 2) {
    verdict.notes.push_back("weak-stability counterexample on a certified equilibrium: "
                            "check the certification and the model assumptions");
  }
  for (const auto& note : verdict.weak.notes) verdict.notes.push_back(note);
  if (verdict.strong.vacuous) verdict.notes.push_back(verdict.strong.warning);
  return verdict;
}

}  // namespace tiebout
