#include <algorithm>
#include <cmath>
#include <limits>

#include "size_iteration.hpp"
#include "tiebout/equilibrium.hpp"
#include "tiebout/error.hpp"
#include "tiebout/parallel.hpp"
#include "tiebout/random.hpp"

namespace tiebout {

double ProviderUtility::operator()(std::size_t i, std::span<const double> z_i,
                                   const NominalState& state) const {
  double u = 0.0;
  for (const auto& term : terms) {
    require(term.param < z_i.size(), "provider utility references a missing parameter");
    const double z = z_i[term.param];
    switch (term.kind) {
      case Term::Kind::target_characteristic: {
        const auto v = state.v_block(i);
        require(term.index < v.size(), "provider utility references a missing characteristic");
        u -= term.weight * (z - v[term.index]) * (z - v[term.index]);
        break;
      }
      case Term::Kind::target_value:
        u -= term.weight * (z - term.target) * (z - term.target);
        break;
      case Term::Kind::revenue:
        u += term.weight * z * state.m[i];
        break;
    }
  }
  return u;
}

BlockLayout ExtendedSpec::z_layout() const {
  std::vector<std::size_t> sizes;
  for (const auto& b : boxes) sizes.push_back(b.lo.size());
  return BlockLayout::from_sizes(sizes);
}

namespace {

void check_box(const FeasibleBox& box, std::size_t dims) {
  if (box.lo.size() != dims || box.hi.size() != dims) {
    fail(ErrorCode::invalid_argument, "feasible box dimension does not match the parameters");
  }
  for (std::size_t a = 0; a < dims; ++a) {
    if (!(box.lo[a] <= box.hi[a])) {
      fail(ErrorCode::empty_feasible_set, "provider feasible set is empty");
    }
  }
}

}  // namespace

std::vector<double> provider_best_response(const ProviderUtility& utility, std::size_t i,
                                           const NominalState& state, const FeasibleBox& box,
                                           double tolerance, std::size_t max_sweeps) {
  const auto current = state.z_block(i);
  check_box(box, current.size());
  std::vector<double> z(current.begin(), current.end());
  for (std::size_t a = 0; a < z.size(); ++a) z[a] = std::clamp(z[a], box.lo[a], box.hi[a]);
  auto value = [&](const std::vector<double>& at) { return utility(i, at, state); };
  double best = value(z);
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    const double before = best;
    for (std::size_t a = 0; a < z.size(); ++a) {
      auto along = [&](double t) {
        std::vector<double> trial = z;
        trial[a] = t;
        return value(trial);
      };
      double lo = box.lo[a], hi = box.hi[a];
      double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
      double f1 = along(x1), f2 = along(x2);
      while (hi - lo > tolerance) {
        if (f1 < f2) {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + ratio * (hi - lo);
          f2 = along(x2);
        } else {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - ratio * (hi - lo);
          f1 = along(x1);
        }
      }
      // Endpoints are candidates too: the maximizer may sit on the box.
      for (double t : {0.5 * (lo + hi), box.lo[a], box.hi[a]}) {
        const double f = along(t);
        if (f > best) {
          best = f;
          z[a] = t;
        }
      }
    }
    if (best - before <= tolerance * std::max(1.0, std::abs(best))) break;
  }
  return z;
}

double provider_max_regret(const ExtendedSpec& spec, const NominalState& state,
                           std::size_t points_per_axis) {
  double worst = 0.0;
  const std::size_t n = spec.providers.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto current = state.z_block(i);
    const auto& box = spec.boxes[i];
    check_box(box, current.size());
    const ProviderUtility& u = spec.providers[i];
    const double base = u(i, current, state);
    std::vector<double> z(current.begin(), current.end());
    const std::size_t d = z.size();
    auto level = [&](std::size_t a, std::size_t k) {
      return box.lo[a] + (box.hi[a] - box.lo[a]) * static_cast<double>(k) /
                             static_cast<double>(points_per_axis - 1);
    };
    double best = base;
    if (d == 0) continue;
    if (d <= 2) {
      const std::size_t total = d == 1 ? points_per_axis : points_per_axis * points_per_axis;
      for (std::size_t k = 0; k < total; ++k) {
        z[0] = level(0, k % points_per_axis);
        if (d == 2) z[1] = level(1, k / points_per_axis);
        best = std::max(best, u(i, z, state));
      }
    } else {
      for (std::size_t a = 0; a < d; ++a) {
        std::vector<double> trial(current.begin(), current.end());
        for (std::size_t k = 0; k < points_per_axis; ++k) {
          trial[a] = level(a, k);
          best = std::max(best, u(i, trial, state));
        }
      }
    }
    worst = std::max(worst, best - base);
  }
  return worst;
}

namespace {

struct InnerState {
  NominalState state;
  Partition partition;
  double size_residual = 0.0;
  double characteristic_residual = 0.0;
  std::size_t iterations = 0;
};

// (m, v) fixed point at the state's z.
InnerState solve_inner(const CostModel& model, const CharacteristicsSpec& spec,
                       const SampledMeasure& mu, NominalState state, const SolverConfig& config,
                       double guard) {
  InnerState out;
  const bool coupled = model.flags().depends_on_characteristics;
  const std::size_t rounds = coupled ? config.max_iterations : 1;
  for (std::size_t round = 0; round < rounds; ++round) {
    auto run = detail::iterate_sizes(model, mu, state, state.m, config, state.epsilon,
                                     config.threads, config.max_iterations);
    out.iterations += run.iterations;
    state.m = run.m;
    state.epsilon = run.epsilon;
    out.size_residual = run.residual;
    out.partition = assign(model, mu, state, config.threads);
    std::vector<double> fv;
    if (spec.layout().total() > 0) {
      fv = realized_characteristics(out.partition, spec, mu, guard);
    }
    if (!coupled) {
      // Sizes do not react to v, so the update is exact.
      state.v = std::move(fv);
      out.characteristic_residual = 0.0;
      break;
    }
    out.characteristic_residual = sup_norm_distance(fv, state.v);
    if (out.characteristic_residual <= config.target_residual) break;
    for (std::size_t k = 0; k < fv.size(); ++k) {
      state.v[k] = (1.0 - config.damping) * state.v[k] + config.damping * fv[k];
    }
  }
  out.state = std::move(state);
  return out;
}

}  // namespace

SolveResult solve_extended(const CostModel& model, const ExtendedSpec& extended,
                           const SampledMeasure& mu, const SolverConfig& config) {
  const std::size_t n = model.communities();
  config.validate(n);
  require(extended.providers.size() == n && extended.boxes.size() == n,
          "one provider utility and feasible box per community are required");
  require(extended.characteristics.communities() == n,
          "characteristics spec and cost model disagree on the community count");
  CharacteristicsSpec spec = extended.characteristics;
  if (mu.type_count() > 1) spec = spec.with_type_shares(mu.type_count());
  const BlockLayout z_layout = extended.z_layout();
  for (std::size_t i = 0; i < n; ++i) check_box(extended.boxes[i], z_layout.size(i));

  std::vector<std::vector<double>> starts = config.provider_starts;
  if (starts.empty()) {
    Rng rng(config.seed);
    for (std::size_t k = 0; k < config.multistart; ++k) {
      std::vector<double> z;
      for (const auto& box : extended.boxes) {
        for (std::size_t a = 0; a < box.lo.size(); ++a) z.push_back(rng.uniform(box.lo[a], box.hi[a]));
      }
      starts.push_back(std::move(z));
    }
  }
  for (const auto& z : starts) {
    require(z.size() == z_layout.total(), "provider start has the wrong number of parameters");
  }

  const double eps0 = config.initial_epsilon(n);
  auto initial_state = [&](const std::vector<double>& z) {
    NominalState s = NominalState::sizes_only(std::vector<double>(n, 1.0 / n), eps0);
    s.v_layout = spec.layout();
    s.v.assign(s.v_layout.total(), 0.5);
    s.z_layout = z_layout;
    s.z = z;
    return s;
  };

  SolveResult result;
  try {
    const NominalState ref = initial_state(starts.front());
    result.small_group_floor =
        small_group_floor(model, mu, 2.0 * attainable_cost_bound(model, mu, ref), ref);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::assumption_violated) throw;
    fail(ErrorCode::assumption2_unverified, e.what());
  }

  const double guard = std::max(extended.mean_guard, 0.5 * config.epsilon_min);
  bool any_cycle = false;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    StartOutcome outcome;
    outcome.start_index = k;
    outcome.start = starts[k];
    InnerState inner;
    std::vector<std::vector<double>> trace;
    std::size_t total_iterations = 0;
    bool converged = false;
    try {
      inner = solve_inner(model, spec, mu, initial_state(starts[k]), config, guard);
      std::vector<std::vector<double>> history{inner.state.z};
      total_iterations = inner.iterations;
      std::size_t stuck = 0;
      for (std::size_t outer = 0; outer < config.max_outer_iterations; ++outer) {
        const std::vector<double> before = inner.state.z;
        for (std::size_t i = 0; i < n; ++i) {
          if (z_layout.size(i) == 0) continue;
          const auto best = provider_best_response(extended.providers[i], i, inner.state,
                                                   extended.boxes[i],
                                                   config.line_search_tolerance, config.max_sweeps);
          std::copy(best.begin(), best.end(), inner.state.z_block(i).begin());
          inner = solve_inner(model, spec, mu, inner.state, config, guard);
          total_iterations += inner.iterations;
        }
        if (config.trace) trace.push_back(inner.state.m);
        const double moved = sup_norm_distance(before, inner.state.z);
        const double regret =
            provider_max_regret(extended, inner.state, config.provider_probe_points);
        outcome.residual = std::max({inner.size_residual, inner.characteristic_residual, regret});
        outcome.iterations = outer + 1;
        if (moved <= config.tolerance && outcome.residual <= config.tolerance) {
          converged = true;
          break;
        }
        // A return to an earlier parameter vector that is not a rest point.
        for (std::size_t h = 0; h + 1 < history.size(); ++h) {
          if (sup_norm_distance(history[h], inner.state.z) <= config.tolerance &&
              moved > config.tolerance) {
            outcome.status = StartOutcome::Status::cycling;
            outcome.detail = "cycle of length " + std::to_string(history.size() - h) +
                             " provider sweeps";
            break;
          }
        }
        if (outcome.status == StartOutcome::Status::cycling) break;
        // Parameters at rest while the residual stays large: a boundary trap.
        stuck = moved <= config.tolerance ? stuck + 1 : 0;
        if (stuck >= 3) break;
        history.push_back(inner.state.z);
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::invalid_argument) throw;
      outcome.detail = std::string(to_string(e.code())) + ": " + e.what();
      result.starts.push_back(std::move(outcome));
      continue;
    }
    outcome.final_m = inner.state.m;
    const bool interior = std::all_of(inner.state.m.begin(), inner.state.m.end(),
                                      [&](double x) { return x > config.epsilon_min; });
    if (outcome.status == StartOutcome::Status::cycling) {
      any_cycle = true;
      result.starts.push_back(std::move(outcome));
      continue;
    }
    if (!converged || (!interior && !config.allow_empty)) {
      outcome.status = converged ? StartOutcome::Status::empty_community
                                 : StartOutcome::Status::no_convergence;
      result.starts.push_back(std::move(outcome));
      continue;
    }
    bool duplicate = false;
    for (const auto& eq : result.equilibria) {
      if (sup_norm_distance(eq.state.m, inner.state.m) <= 10.0 * config.tolerance &&
          sup_norm_distance(eq.state.z, inner.state.z) <= 10.0 * config.tolerance) {
        duplicate = true;
        outcome.detail = "same as start " + std::to_string(eq.start_index);
        break;
      }
    }
    outcome.status =
        duplicate ? StartOutcome::Status::duplicate : StartOutcome::Status::converged;
    if (!duplicate) {
      EquilibriumReport report;
      report.state = inner.state;
      report.partition = inner.partition;
      report.partition.characteristics = inner.state.v;
      report.all_nonempty = interior;
      report.iterations = total_iterations;
      report.start_index = k;
      report.trace = std::move(trace);
      ExtendedSpec resolved = extended;
      resolved.characteristics = spec;
      report.residuals = verify_equilibrium(model, mu, report, &resolved,
                                            config.provider_probe_points, config.threads);
      result.equilibria.push_back(std::move(report));
    }
    result.starts.push_back(std::move(outcome));
  }
  if (result.equilibria.empty()) {
    if (any_cycle) {
      fail(ErrorCode::cycling_detected, "provider best responses cycle without converging");
    }
    fail(ErrorCode::no_convergence, "no start of the extended solver converged");
  }
  return result;
}

}  // namespace tiebout
