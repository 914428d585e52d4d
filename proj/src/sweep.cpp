#include "tiebout/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tiebout/error.hpp"

namespace tiebout {

std::string to_string(WarmStart w) {
  return w == WarmStart::fresh_multistart ? "fresh-multistart" : "continue-from-previous";
}

void SweepPlan::validate(const CostModel& model) const {
  require(!values.empty(), "sweep needs at least one value");
  model.parameter(parameter);  // throws on an unknown path
  if (values.size() > 1) {
    const bool up = values[1] > values[0];
    for (std::size_t k = 1; k < values.size(); ++k) {
      require(up ? values[k] > values[k - 1] : values[k] < values[k - 1],
              "sweep values must be strictly monotone");
    }
  }
}

bool gradient_gap_vanishes(const CostModel& model, const SampledMeasure& mu,
                           const NominalState& state) {
  const std::size_t n = model.communities();
  if (n < 2) return false;
  for (std::size_t j = 0; j < mu.type_count(); ++j) {
    const auto& t = mu.type(j);
    const std::size_t stride = std::max<std::size_t>(1, t.size() / 257);
    for (std::size_t s = 0; s < t.size(); s += stride) {
      std::vector<std::optional<Point>> g(n);
      for (std::size_t i = 0; i < n; ++i) g[i] = model.try_grad_x(j, i, t.point(s), state);
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
          if (!g[a] || !g[b]) return false;
          for (std::size_t k = 0; k < t.dimension(); ++k) {
            if (std::abs((*g[a])[k] - (*g[b])[k]) > 1e-12) return false;
          }
        }
      }
    }
  }
  return true;
}

namespace {

double worst_sum(const StabilityVerdict& v) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& c : v.conditions) worst = std::max(worst, c.sum);
  return worst;
}

// Largest condition sum at one equilibrium, without the searches.
double condition_only(const CostModel& model, const SampledMeasure& mu,
                      const EquilibriumReport& eq, const BorderOptions& options) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& border : adjacent_borders(model, mu, eq, options)) {
    worst = std::max(worst, strong_stability_condition(model, mu, eq, border, border.i,
                                                       border.j).sum);
    worst = std::max(worst, strong_stability_condition(model, mu, eq, border, border.j,
                                                       border.i).sum);
  }
  return worst;
}

const SweepPoint* find_branch(const SweepRow& row, std::size_t branch) {
  for (const auto& p : row.points) {
    if (p.branch == branch) return &p;
  }
  return nullptr;
}

constexpr double kMatchRadius = 0.05;

}  // namespace

SweepResult comparative_statics(const CostModel& model, const SampledMeasure& mu,
                                const SweepPlan& plan, const SolverConfig& solver,
                                const StabilitySettings& stability) {
  plan.validate(model);
  SweepResult result;
  result.plan = plan;
  std::size_t next_branch = 0;
  const SweepRow* previous = nullptr;

  for (double value : plan.values) {
    SweepRow row;
    row.value = value;
    try {
      const CostModel at = model.with_parameter(plan.parameter, value);
      SolverConfig config = solver;
      if (plan.warm_start == WarmStart::continue_from_previous && previous != nullptr) {
        config.size_starts.clear();
        for (const auto& p : previous->points) config.size_starts.push_back(p.eq.state.m);
      }
      auto solved = solve_basic(at, mu, config);
      for (auto& eq : solved.equilibria) {
        SweepPoint point;
        point.eq = std::move(eq);
        if (plan.classify) {
          if (gradient_gap_vanishes(at, mu, point.eq.state)) {
            point.note = "cost gradient gap vanishes: borders are not regular";
          } else {
            try {
              point.verdict = classify_stability(at, mu, point.eq, stability);
              point.worst_condition = worst_sum(*point.verdict);
            } catch (const Error& e) {
              point.note = std::string(to_string(e.code())) + ": " + e.what();
            }
          }
        }
        row.points.push_back(std::move(point));
      }
    } catch (const Error& e) {
      row.failed = true;
      row.error = std::string(to_string(e.code())) + ": " + e.what();
    }

    // Nearest-state branch matching against the last row with equilibria.
    std::vector<bool> claimed(previous ? previous->points.size() : 0, false);
    for (auto& point : row.points) {
      std::size_t best = claimed.size();
      double best_d = kMatchRadius;
      for (std::size_t k = 0; k < claimed.size(); ++k) {
        if (claimed[k]) continue;
        const double d = sup_norm_distance(point.eq.state.m, previous->points[k].eq.state.m);
        if (d <= best_d) {
          best_d = d;
          best = k;
        }
      }
      if (best < claimed.size()) {
        claimed[best] = true;
        point.branch = previous->points[best].branch;
      } else {
        point.branch = next_branch++;
        if (previous != nullptr) {
          result.branch_events.push_back("branch " + std::to_string(point.branch) +
                                         " born at " + std::to_string(value));
        }
      }
    }
    for (std::size_t k = 0; k < claimed.size(); ++k) {
      if (!claimed[k] && !row.failed) {
        result.branch_events.push_back("branch " + std::to_string(previous->points[k].branch) +
                                       " ends before " + std::to_string(value));
      }
    }
    result.rows.push_back(std::move(row));
    if (!result.rows.back().points.empty()) previous = &result.rows.back();
  }

  // Classification flips along each branch.
  for (std::size_t b = 0; b < next_branch; ++b) {
    const SweepRow* last = nullptr;
    const SweepPoint* last_point = nullptr;
    for (const auto& row : result.rows) {
      const SweepPoint* p = find_branch(row, b);
      if (p == nullptr || !p->verdict) continue;
      if (last_point != nullptr &&
          last_point->verdict->classification != p->verdict->classification &&
          last_point->verdict->classification != Classification::unstable &&
          p->verdict->classification != Classification::unstable) {
        FlipPoint flip;
        flip.branch = b;
        flip.lo = last->value;
        flip.hi = row.value;
        flip.from = last_point->verdict->classification;
        flip.to = p->verdict->classification;
        double a = flip.lo, fa = last_point->worst_condition;
        double c = flip.hi, fc = p->worst_condition;
        if (plan.refine_flips && (fa < 0.0) != (fc < 0.0)) {
          try {
            const double mid = 0.5 * (a + c);
            const CostModel at = model.with_parameter(plan.parameter, mid);
            SolverConfig config = solver;
            config.size_starts = {last_point->eq.state.m, p->eq.state.m};
            auto solved = solve_basic(at, mu, config);
            const EquilibriumReport* nearest = nullptr;
            double best_d = std::numeric_limits<double>::infinity();
            for (const auto& eq : solved.equilibria) {
              const double d = sup_norm_distance(eq.state.m, last_point->eq.state.m);
              if (d < best_d) {
                best_d = d;
                nearest = &eq;
              }
            }
            if (nearest != nullptr && best_d <= kMatchRadius) {
              const double fm = condition_only(at, mu, *nearest, stability.borders);
              if ((fa < 0.0) != (fm < 0.0)) {
                c = mid;
                fc = fm;
              } else {
                a = mid;
                fa = fm;
              }
              flip.refined = true;
            }
          } catch (const Error&) {
            // Keep the unrefined bracket.
          }
        }
        flip.estimate = (fa < 0.0) != (fc < 0.0) ? a + (c - a) * (0.0 - fa) / (fc - fa)
                                                 : 0.5 * (a + c);
        result.flips.push_back(flip);
      }
      last = &row;
      last_point = p;
    }
  }
  return result;
}

WeakRegression weak_stability_regression(const SweepResult& sweep, const CostModel& model,
                                         const SampledMeasure& mu,
                                         const StabilitySettings& settings) {
  WeakRegression out;
  for (const auto& row : sweep.rows) {
    const std::string where = sweep.plan.parameter + "=" + std::to_string(row.value);
    if (row.failed) {
      ++out.skipped;
      out.details.push_back(where + ": skipped, no equilibrium (" + row.error + ")");
      continue;
    }
    const CostModel at = model.with_parameter(sweep.plan.parameter, row.value);
    for (const auto& point : row.points) {
      if (gradient_gap_vanishes(at, mu, point.eq.state)) {
        ++out.skipped;
        out.details.push_back(where + ": skipped, cost gradient gap vanishes");
        continue;
      }
      try {
        const auto weak = weak_stability_search(at, mu, point.eq, settings.eps_ball,
                                                settings.weak_trials, settings.seed,
                                                settings.min_ball, settings.threads,
                                                settings.borders);
        ++out.checked;
        if (!weak.stable) {
          ++out.counterexamples;
          out.details.push_back(where + ": weak-stability counterexample on branch " +
                                std::to_string(point.branch));
        } else if (weak.certified_radius < settings.eps_ball) {
          out.details.push_back(where + ": weakly stable at radius " +
                                std::to_string(weak.certified_radius));
        }
      } catch (const Error& e) {
        ++out.skipped;
        out.details.push_back(where + ": skipped, " + std::string(to_string(e.code())));
      }
    }
  }
  return out;
}

}  // namespace tiebout
