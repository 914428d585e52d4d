#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tiebout/costs.hpp"
#include "tiebout/equilibrium.hpp"
#include "tiebout/measure.hpp"
#include "tiebout/partition.hpp"

namespace tiebout {

// A group of community-i agents considering a joint move to j. Members
// are global sample indices; member_mass is the part of each sample's
// weight currently assigned to i.
struct DeviationCandidate {
  std::size_t source = 0;
  std::size_t target = 0;
  std::vector<std::size_t> members;
  std::vector<double> member_mass;
  double mass = 0.0;
  std::string origin;
};

struct DeviationCheck {
  std::vector<double> gains;  // per member, at the least favourable point of its cell
  double worst_member_gain = 0.0;
  bool profitable = false;
};

// Costs after the move are evaluated at the updated sizes m'. An empty
// candidate is never profitable.
DeviationCheck verify_deviation(const CostModel& model, const SampledMeasure& mu,
                                const EquilibriumReport& eq,
                                const DeviationCandidate& candidate);

struct WeakSearchResult {
  bool stable = true;
  double requested_radius = 0.0;
  double certified_radius = 0.0;  // largest tried radius with no hit; 0 if none
  std::size_t trials = 0;
  std::size_t hits_at_requested = 0;
  std::optional<DeviationCandidate> counterexample;  // first hit at the requested radius
  std::optional<DeviationCheck> counterexample_check;
  std::vector<std::string> notes;
};

// Randomized ball search around border points. Weak stability only asks
// for some positive radius, so after a hit the radius is halved (down to
// min_radius) and the search repeated.
WeakSearchResult weak_stability_search(const CostModel& model, const SampledMeasure& mu,
                                       const EquilibriumReport& eq, double radius,
                                       std::size_t trials, std::uint64_t seed,
                                       double min_radius = 0.0, std::size_t threads = 1,
                                       const BorderOptions& borders = {});

struct StrongCondition {
  std::size_t i = 0;
  std::size_t j = 0;
  double integral = 0.0;
  double scale_term = 0.0;
  double sum = 0.0;
  bool satisfied = false;
  bool windowed = false;         // non-separable: worst window reported
  std::size_t windows = 1;
  bool point_border = false;     // 1-D: border integral is a point evaluation
  Point y;                       // where the scale term was taken
};

// Border integral of density / gradient gap plus 1 / (d c_j / d m_j).
StrongCondition strong_stability_condition(const CostModel& model, const SampledMeasure& mu,
                                           const EquilibriumReport& eq, std::size_t i,
                                           std::size_t j, const BorderOptions& borders = {});
StrongCondition strong_stability_condition(const CostModel& model, const SampledMeasure& mu,
                                           const EquilibriumReport& eq, const Border& border,
                                           std::size_t i, std::size_t j);

struct StrongSearchResult {
  bool found = false;
  std::optional<DeviationCandidate> counterexample;
  std::optional<DeviationCheck> counterexample_check;
  std::size_t candidates_tested = 0;
  bool vacuous = false;
  std::string warning;
};

// Cost-band strips of mass eps_mass along each border, then randomized
// sub-border windows.
StrongSearchResult strong_stability_search(const CostModel& model, const SampledMeasure& mu,
                                           const EquilibriumReport& eq, double eps_mass,
                                           std::size_t trials, std::uint64_t seed,
                                           std::size_t threads = 1,
                                           const BorderOptions& borders = {});

enum class Classification { unstable, weakly_stable_only, strongly_stable };
std::string to_string(Classification c);

struct StabilitySettings {
  double eps_ball = 0.02;
  double min_ball = 0.02 / 64.0;
  std::size_t weak_trials = 500;
  double eps_mass = 0.05;
  std::size_t strong_trials = 200;
  std::uint64_t seed = 7;
  std::size_t threads = 1;
  BorderOptions borders;
};

struct StabilityVerdict {
  WeakSearchResult weak;
  std::vector<StrongCondition> conditions;  // ordered adjacent pairs
  StrongSearchResult strong;
  Classification classification = Classification::unstable;
  std::vector<std::string> notes;
};

// Adjacent ordered pairs (i, j) with their borders.
std::vector<Border> adjacent_borders(const CostModel& model, const SampledMeasure& mu,
                                     const EquilibriumReport& eq,
                                     const BorderOptions& options = {});

StabilityVerdict classify_stability(const CostModel& model, const SampledMeasure& mu,
                                    const EquilibriumReport& eq,
                                    const StabilitySettings& settings = {});

}  // namespace tiebout
