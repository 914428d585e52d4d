#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tiebout/costs.hpp"
#include "tiebout/measure.hpp"
#include "tiebout/partition.hpp"
#include "tiebout/state.hpp"

namespace tiebout {

struct SolverConfig {
  double epsilon_floor = 0.02;  // capped at 0.2 / n when solving
  double epsilon_anneal = 0.5;  // per-iteration factor toward epsilon_min
  double epsilon_min = 1e-3;
  double damping = 0.5;
  double tolerance = 1e-6;
  // Iteration continues until the size residual drops to this level (or
  // stalls), so that certified states sit well inside the tolerance.
  double target_residual = 1e-12;
  std::size_t max_iterations = 200;
  std::size_t multistart = 20;
  std::uint64_t seed = 1;
  bool newton = true;
  bool allow_empty = false;
  bool trace = false;
  std::size_t threads = 1;
  // Explicit size starts replace the multistart points when given.
  std::vector<std::vector<double>> size_starts;

  // Extended model.
  double line_search_tolerance = 1e-10;
  std::size_t max_sweeps = 50;           // coordinate cycles per best response
  std::size_t max_outer_iterations = 500;
  std::size_t provider_probe_points = 41;  // per axis, for regret verification
  std::vector<std::vector<double>> provider_starts;  // flat z per start

  // Effective floor for n communities.
  double initial_epsilon(std::size_t n) const;
  void validate(std::size_t n) const;
};

struct Residuals {
  double size = 0.0;
  double characteristic = 0.0;
  double agent_max_regret = 0.0;
  double provider_max_regret = 0.0;
};

struct EquilibriumReport {
  NominalState state;
  Partition partition;
  Residuals residuals;
  bool all_nonempty = false;
  std::size_t iterations = 0;
  std::size_t start_index = 0;
  std::vector<std::vector<double>> trace;  // per-iteration m, when requested
};

struct StartOutcome {
  enum class Status { converged, duplicate, no_convergence, empty_community, cycling };
  std::size_t start_index = 0;
  Status status = Status::no_convergence;
  std::vector<double> start;
  std::vector<double> final_m;
  double residual = 0.0;
  std::size_t iterations = 0;
  std::string detail;
};

std::string to_string(StartOutcome::Status status);

struct SolveResult {
  std::vector<EquilibriumReport> equilibria;  // sorted by start index
  std::vector<StartOutcome> starts;
  std::vector<double> small_group_floor;
};

// Multistart points on M_eps: pulled-in vertices, the barycenter, then
// seeded Dirichlet(1) draws, `count` in total.
std::vector<std::vector<double>> multistart_points(std::size_t n, std::size_t count,
                                                   double epsilon, std::uint64_t seed);

// Damped fixed-point iteration on the size map from each start, with a
// Newton corrector in the tangent space of the simplex. Throws
// assumption2_unverified when no small-group floor exists and
// no_convergence when no start converges.
SolveResult solve_basic(const CostModel& model, const SampledMeasure& mu,
                        const SolverConfig& config);

// Agent regret is measured cell by cell: a sample's mass in community i
// regrets only where c_i exceeds another community's cost everywhere in
// its cell (linearized), so cells split along a border are not charged
// for their width.
double agent_max_regret(const CostModel& model, const SampledMeasure& mu,
                        const Partition& partition, const NominalState& at);

// -- extended model ---------------------------------------------------------

// u_i(z_i; m, v) as a sum of quasi-concave pieces.
struct ProviderUtility {
  struct Term {
    enum class Kind {
      target_characteristic,  // -weight * (z[param] - v_i[index])^2
      target_value,           // -weight * (z[param] - target)^2
      revenue,                // weight * z[param] * m_i
    };
    Kind kind = Kind::target_characteristic;
    std::size_t param = 0;
    std::size_t index = 0;
    double weight = 1.0;
    double target = 0.0;
  };
  std::vector<Term> terms;

  double operator()(std::size_t i, std::span<const double> z_i,
                    const NominalState& state) const;
};

// Feasible parameter box of one provider, a subset of [0,1]^d.
struct FeasibleBox {
  std::vector<double> lo;
  std::vector<double> hi;
};

struct ExtendedSpec {
  CharacteristicsSpec characteristics;
  std::vector<ProviderUtility> providers;  // one per community
  std::vector<FeasibleBox> boxes;          // one per community
  double mean_guard = 0.0;  // raised to epsilon_min / 2 when solving

  BlockLayout z_layout() const;
};

// Coordinate-wise golden-section maximization of u_i over the box with
// (m, v, z_{-i}) held fixed; throws empty_feasible_set.
std::vector<double> provider_best_response(const ProviderUtility& utility, std::size_t i,
                                           const NominalState& state, const FeasibleBox& box,
                                           double tolerance = 1e-10,
                                           std::size_t max_sweeps = 50);

// Largest utility gain any provider obtains on a uniform probe grid of its
// box (coordinate-wise probes beyond two parameters).
double provider_max_regret(const ExtendedSpec& spec, const NominalState& state,
                           std::size_t points_per_axis);

// Nested iteration: (m, v) fixed point at fixed z, then a Gauss-Seidel
// sweep of provider best responses. Throws no_convergence, or
// cycling_detected when every start failed and one of them cycled.
SolveResult solve_extended(const CostModel& model, const ExtendedSpec& spec,
                           const SampledMeasure& mu, const SolverConfig& config);

// Recomputes the partition at the report's state and all residuals.
Residuals verify_equilibrium(const CostModel& model, const SampledMeasure& mu,
                             const EquilibriumReport& report,
                             const ExtendedSpec* extended = nullptr,
                             std::size_t probe_points = 41, std::size_t threads = 1);

// -- Sperner / KKM oracle ---------------------------------------------------

struct KkmCell {
  std::vector<std::vector<double>> vertices;  // sizes m at the cell corners
  std::vector<std::size_t> labels;
};

struct KkmResult {
  std::size_t depth = 0;
  double epsilon = 0.0;
  std::vector<KkmCell> cells;  // fully labelled cells
  bool assumption2_violated = false;
  bool boundary_only = false;  // every returned cell touches the boundary of M_eps
  std::string note;
};

// Kuhn triangulation of M_eps with `depth` subdivisions per edge; vertex m
// is labelled with the lowest i such that f_i(m) >= m_i. n <= 4.
KkmResult kkm_oracle(const CostModel& model, const SampledMeasure& mu, double epsilon,
                     std::size_t depth, std::size_t threads = 1);

}  // namespace tiebout
