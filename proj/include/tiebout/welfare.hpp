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

struct CommunityWelfare {
  double mass = 0.0;
  double total_cost = 0.0;
  double mean_cost = 0.0;
  double max_cost = 0.0;
  // Lowest-cost member; under separable costs also the lowest distance cost.
  std::optional<std::size_t> best_sample;
  Point best_x;
  double best_cost = 0.0;
};

struct WelfareSummary {
  double total_cost = 0.0;
  std::vector<CommunityWelfare> communities;
};

// Costs are evaluated at the partition's realized sizes, with v and z
// taken from `state`.
WelfareSummary aggregate_welfare(const CostModel& model, const SampledMeasure& mu,
                                 const Partition& partition, const NominalState& state);

struct AllocationComparison {
  enum class Status { improvement, no_improvement, out_of_scope };
  Status status = Status::no_improvement;
  std::size_t worse = 0;       // agents losing more than 1e-12
  std::size_t better = 0;      // agents gaining more than the tolerance
  double largest_gain = 0.0;
  double largest_loss = 0.0;
  std::vector<double> sizes;   // realized sizes of the alternative
  std::string note;
};

std::string to_string(AllocationComparison::Status status);

// Pointwise comparison of an alternative hard allocation (one community per
// sample) against the equilibrium. Alternatives whose set of non-empty
// communities differs from the equilibrium's are out of scope.
AllocationComparison compare_allocation(const CostModel& model, const SampledMeasure& mu,
                                        const EquilibriumReport& eq,
                                        const std::vector<std::size_t>& labels,
                                        double tolerance);

struct ParetoProbeResult {
  bool improvement_found = false;
  std::size_t trials = 0;
  std::size_t out_of_scope = 0;  // trials whose alternative changed the non-empty set
  std::optional<std::vector<std::size_t>> counterexample;  // labels of the alternative
  std::optional<AllocationComparison> replay;
  std::string note = "falsification probe: absence of an improvement is evidence, not proof";
};

// Random alternatives with the equilibrium's non-empty communities: (a)
// perturbed sizes with cost-minimizing reassignment, (b) random moves of
// near-border agents. Throws non_separable_model for non-separable costs.
ParetoProbeResult pareto_probe(const CostModel& model, const SampledMeasure& mu,
                               const EquilibriumReport& eq, std::size_t trials,
                               std::uint64_t seed, double tolerance = 1e-6,
                               std::size_t threads = 1);

}  // namespace tiebout
