#include "tiebout/welfare.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tiebout/error.hpp"
#include "tiebout/parallel.hpp"
#include "tiebout/random.hpp"

namespace tiebout {

namespace {

NominalState with_sizes_floored(const NominalState& state, const std::vector<double>& sizes) {
  NominalState s = state;
  s.m = sizes;
  for (double& x : s.m) x = std::max(x, 1e-300);
  return s;
}

}  // namespace

WelfareSummary aggregate_welfare(const CostModel& model, const SampledMeasure& mu,
                                 const Partition& partition, const NominalState& state) {
  const std::size_t n = model.communities();
  const NominalState at = with_sizes_floored(state, partition.sizes);
  WelfareSummary out;
  out.communities.resize(n);
  for (std::size_t j = 0; j < mu.type_count(); ++j) {
    const auto& t = mu.type(j);
    const std::size_t base = mu.offset(j);
    for (std::size_t s = 0; s < t.size(); ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        const double f = partition.fraction(base + s, i);
        if (f <= 0.0) continue;
        auto& c = out.communities[i];
        const double cost = model.eval(j, i, t.point(s), at);
        const double mass = t.weights[s] * f;
        c.mass += mass;
        c.total_cost += mass * cost;
        c.max_cost = c.best_sample ? std::max(c.max_cost, cost) : cost;
        if (!c.best_sample || cost < c.best_cost) {
          c.best_sample = base + s;
          c.best_x.assign(t.point(s).begin(), t.point(s).end());
          c.best_cost = cost;
        }
      }
    }
  }
  for (auto& c : out.communities) {
    c.mean_cost = c.mass > 0.0 ? c.total_cost / c.mass : 0.0;
    out.total_cost += c.total_cost;
  }
  return out;
}

std::string to_string(AllocationComparison::Status status) {
  switch (status) {
    case AllocationComparison::Status::improvement: return "improvement";
    case AllocationComparison::Status::no_improvement: return "no-improvement";
    case AllocationComparison::Status::out_of_scope: return "out-of-scope";
  }
  return "no-improvement";
}

namespace {

// Each sample's cost in the equilibrium: its labelled community at the
// equilibrium sizes.
std::vector<double> equilibrium_costs(const CostModel& model, const SampledMeasure& mu,
                                      const EquilibriumReport& eq) {
  std::vector<double> cost(mu.size());
  for (std::size_t j = 0; j < mu.type_count(); ++j) {
    const auto& t = mu.type(j);
    const std::size_t base = mu.offset(j);
    for (std::size_t s = 0; s < t.size(); ++s) {
      cost[base + s] = model.eval(j, eq.partition.labels[base + s], t.point(s), eq.state);
    }
  }
  return cost;
}

AllocationComparison compare_with(const CostModel& model, const SampledMeasure& mu,
                                  const EquilibriumReport& eq,
                                  const std::vector<double>& baseline,
                                  const std::vector<std::size_t>& labels, double tolerance) {
  const std::size_t n = model.communities();
  require(labels.size() == mu.size(), "alternative allocation must label every sample");
  AllocationComparison out;
  out.sizes.assign(n, 0.0);
  for (std::size_t j = 0; j < mu.type_count(); ++j) {
    const auto& t = mu.type(j);
    for (std::size_t s = 0; s < t.size(); ++s) {
      const std::size_t label = labels[mu.offset(j) + s];
      require(label < n, "alternative allocation uses an unknown community");
      out.sizes[label] += t.weights[s];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const bool before = eq.partition.sizes[i] > 0.0;
    const bool after = out.sizes[i] > 0.0;
    if (before != after) {
      out.status = AllocationComparison::Status::out_of_scope;
      out.note = "the alternative changes the set of non-empty communities; Pareto "
                 "optimality is only claimed for a fixed set of non-empty communities";
      return out;
    }
  }
  const NominalState at = with_sizes_floored(eq.state, out.sizes);
  for (std::size_t j = 0; j < mu.type_count(); ++j) {
    const auto& t = mu.type(j);
    const std::size_t base = mu.offset(j);
    for (std::size_t s = 0; s < t.size(); ++s) {
      const double alt = model.eval(j, labels[base + s], t.point(s), at);
      const double delta = baseline[base + s] - alt;
      if (delta < -1e-12) ++out.worse;
      if (delta > tolerance) ++out.better;
      out.largest_gain = std::max(out.largest_gain, delta);
      out.largest_loss = std::max(out.largest_loss, -delta);
    }
  }
  out.status = out.worse == 0 && out.better > 0 ? AllocationComparison::Status::improvement
                                                 : AllocationComparison::Status::no_improvement;
  return out;
}

}  // namespace

AllocationComparison compare_allocation(const CostModel& model, const SampledMeasure& mu,
                                        const EquilibriumReport& eq,
                                        const std::vector<std::size_t>& labels,
                                        double tolerance) {
  return compare_with(model, mu, eq, equilibrium_costs(model, mu, eq), labels, tolerance);
}

ParetoProbeResult pareto_probe(const CostModel& model, const SampledMeasure& mu,
                               const EquilibriumReport& eq, std::size_t trials,
                               std::uint64_t seed, double tolerance, std::size_t threads) {
  if (!model.flags().separable) {
    fail(ErrorCode::non_separable_model,
         "Pareto probe needs separable costs (distance part plus size part); the "
         "optimality result does not hold without separability");
  }
  const std::size_t n = model.communities();
  ParetoProbeResult result;
  result.trials = trials;
  const auto baseline = equilibrium_costs(model, mu, eq);

  // Near-border agents: samples ordered by the cost gap to their best
  // alternative community.
  struct Near {
    double gap;
    std::size_t sample;
    std::size_t alternative;
  };
  std::vector<Near> near;
  for (std::size_t j = 0; j < mu.type_count(); ++j) {
    const auto& t = mu.type(j);
    const std::size_t base = mu.offset(j);
    for (std::size_t s = 0; s < t.size(); ++s) {
      const std::size_t label = eq.partition.labels[base + s];
      double best = std::numeric_limits<double>::infinity();
      std::size_t alternative = label;
      for (std::size_t i = 0; i < n; ++i) {
        if (i == label || eq.partition.sizes[i] <= 0.0) continue;
        const double gap = model.eval(j, i, t.point(s), eq.state) - baseline[base + s];
        if (gap < best) {
          best = gap;
          alternative = i;
        }
      }
      if (alternative != label) near.push_back({best, base + s, alternative});
    }
  }
  std::sort(near.begin(), near.end(),
            [](const Near& a, const Near& b) { return a.gap < b.gap || (a.gap == b.gap && a.sample < b.sample); });

  std::vector<std::optional<std::vector<std::size_t>>> hits(trials);
  std::vector<unsigned char> scope(trials, 0);
  parallel_for(trials, threads, [&](std::size_t trial) {
    Rng rng = Rng::stream(seed, trial);
    std::vector<std::size_t> labels = eq.partition.labels;
    if (trial % 2 == 0 && n > 1) {
      // (a) Perturbed nominal sizes, every agent to its cheapest community.
      std::vector<double> direction = rng.dirichlet(n);
      const double step = std::exp(rng.uniform(std::log(1e-4), std::log(0.1)));
      std::vector<double> m(n);
      for (std::size_t i = 0; i < n; ++i) {
        m[i] = std::max(eq.state.m[i] + step * (direction[i] - 1.0 / n), 1e-6);
      }
      const NominalState perturbed = with_sizes_floored(eq.state, m);
      for (std::size_t j = 0; j < mu.type_count(); ++j) {
        const auto& t = mu.type(j);
        const std::size_t base = mu.offset(j);
        for (std::size_t s = 0; s < t.size(); ++s) {
          std::size_t best = 0;
          double best_cost = std::numeric_limits<double>::infinity();
          for (std::size_t i = 0; i < n; ++i) {
            const double c = model.eval(j, i, t.point(s), perturbed);
            if (c < best_cost) {
              best_cost = c;
              best = i;
            }
          }
          labels[base + s] = best;
        }
      }
    } else if (!near.empty()) {
      // (b) A random number of the closest-to-indifferent agents switch.
      const std::size_t pool = std::max<std::size_t>(1, near.size() / 10);
      const std::size_t count = 1 + rng.index(pool);
      for (std::size_t k = 0; k < count; ++k) {
        const Near& pick = near[rng.index(std::min(near.size(), 4 * pool))];
        labels[pick.sample] = pick.alternative;
      }
    }
    auto cmp = compare_with(model, mu, eq, baseline, labels, tolerance);
    if (cmp.status == AllocationComparison::Status::out_of_scope) scope[trial] = 1;
    if (cmp.status == AllocationComparison::Status::improvement) hits[trial] = std::move(labels);
  });
  for (std::size_t t = 0; t < trials; ++t) {
    result.out_of_scope += scope[t];
    if (hits[t] && !result.improvement_found) {
      // Replay before reporting.
      auto replay = compare_allocation(model, mu, eq, *hits[t], tolerance);
      if (replay.status == AllocationComparison::Status::improvement) {
        result.improvement_found = true;
        result.counterexample = hits[t];
        result.replay = std::move(replay);
      }
    }
  }
  return result;
}

}  // namespace tiebout
