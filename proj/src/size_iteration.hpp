#pragma once

#include <cstddef>
#include <vector>

#include "tiebout/costs.hpp"
#include "tiebout/equilibrium.hpp"
#include "tiebout/measure.hpp"
#include "tiebout/state.hpp"

namespace tiebout::detail {

struct SizeIteration {
  std::vector<double> m;
  double residual = 0.0;
  double epsilon = 0.0;
  std::size_t iterations = 0;
  std::vector<std::vector<double>> trace;
};

// Fixed point of m -> size_map(m) with v and z taken from `base`.
SizeIteration iterate_sizes(const CostModel& model, const SampledMeasure& mu,
                            const NominalState& base, std::vector<double> start,
                            const SolverConfig& config, double epsilon,
                            std::size_t threads, std::size_t max_iterations);

NominalState with_m(const NominalState& base, std::vector<double> m);

// Realized sizes floored away from zero so that costs stay finite when a
// community is empty.
NominalState at_realized_sizes(const NominalState& base, const std::vector<double>& sizes);

}  // namespace tiebout::detail
