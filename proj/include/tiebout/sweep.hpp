#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tiebout/costs.hpp"
#include "tiebout/equilibrium.hpp"
#include "tiebout/measure.hpp"
#include "tiebout/stability.hpp"

namespace tiebout {

enum class WarmStart { fresh_multistart, continue_from_previous };
std::string to_string(WarmStart w);

struct SweepPlan {
  std::string parameter;       // CostModel::with_parameter path
  std::vector<double> values;  // strictly monotone
  WarmStart warm_start = WarmStart::fresh_multistart;
  bool classify = true;
  bool refine_flips = true;

  void validate(const CostModel& model) const;
};

struct SweepPoint {
  std::size_t branch = 0;
  EquilibriumReport eq;
  std::optional<StabilityVerdict> verdict;
  double worst_condition = 0.0;  // largest condition sum over ordered pairs
  std::string note;              // why no verdict was computed
};

struct SweepRow {
  double value = 0.0;
  bool failed = false;
  std::string error;
  std::vector<SweepPoint> points;
};

struct FlipPoint {
  std::size_t branch = 0;
  double lo = 0.0;  // adjacent sweep values bracketing the flip
  double hi = 0.0;
  double estimate = 0.0;  // after one bisection and linear interpolation
  Classification from = Classification::strongly_stable;
  Classification to = Classification::weakly_stable_only;
  bool refined = false;
};

struct SweepResult {
  SweepPlan plan;
  std::vector<SweepRow> rows;
  std::vector<FlipPoint> flips;
  std::vector<std::string> branch_events;  // births and deaths
  std::string hypotheses_check = "local";  // checked at computed equilibria only
};

// Per value: equilibria (warm-started per plan), stability verdicts and
// condition values; branches are matched by nearest state between rows.
SweepResult comparative_statics(const CostModel& model, const SampledMeasure& mu,
                                const SweepPlan& plan, const SolverConfig& solver,
                                const StabilitySettings& stability);

struct WeakRegression {
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::size_t counterexamples = 0;
  std::vector<std::string> details;
  bool passed() const { return counterexamples == 0; }
};

// True when no sampled agent's cost gradient distinguishes any two
// communities (e.g. zero distance scale): borders are not regular there.
bool gradient_gap_vanishes(const CostModel& model, const SampledMeasure& mu,
                           const NominalState& state);

// Weak-stability search at every sweep point. Points where the cost
// gradient gap vanishes (e.g. zero distance scale) are skipped.
WeakRegression weak_stability_regression(const SweepResult& sweep, const CostModel& model,
                                         const SampledMeasure& mu,
                                         const StabilitySettings& settings);

}  // namespace tiebout
