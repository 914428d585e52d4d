#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tiebout/measure.hpp"
#include "tiebout/state.hpp"

namespace tiebout {

// scale * ||x - center_i||_exponent ^ power. Centers are either fixed per
// community or read from the community's provider parameters starting at
// `provider_offset`.
struct MetricTerm {
  std::vector<Point> centers;
  double scale = 1.0;
  double exponent = 2.0;
  double power = 1.0;
  bool center_from_provider = false;
  std::size_t provider_offset = 0;
};

// g_i / m_i: a fixed cost shared equally by the members.
struct FixedShareTerm {
  std::vector<double> g;
};

// coefficient * z_i[param_index]: an entry fee set by the provider.
struct FeeTerm {
  double coefficient = 1.0;
  std::size_t param_index = 0;
};

// kappa * (v_i[index] - ref)^2 with ref = x[agent_axis] when given, else
// `target`.
struct CharacteristicTerm {
  double kappa = 1.0;
  std::size_t index = 0;
  std::optional<std::size_t> agent_axis;
  double target = 0.0;
};

// kappa * sum_{k != i} m_k * ||x - centers_k||: congestion spilling over
// from neighbouring communities, felt more by agents living close to them.
struct SpilloverTerm {
  double kappa = 0.0;
  std::vector<Point> centers;
};

using CostTermKind =
    std::variant<MetricTerm, FixedShareTerm, FeeTerm, CharacteristicTerm, SpilloverTerm>;

struct CostTerm {
  CostTermKind kind;
  std::vector<std::size_t> types;  // empty: applies to every agent type

  bool applies_to(std::size_t type) const;
};

enum class GradientMode { analytic, central_difference };

struct CostFlags {
  bool separable = true;
  bool depends_on_other_sizes = false;
  bool depends_on_characteristics = false;
  bool depends_on_provider_params = false;
};

class CostModel {
 public:
  CostModel() = default;
  CostModel(std::size_t communities, std::vector<CostTerm> terms,
            GradientMode mode = GradientMode::analytic, double step_x = 1e-5,
            double step_m = 1e-5);

  std::size_t communities() const { return communities_; }
  const std::vector<CostTerm>& terms() const { return terms_; }
  GradientMode gradient_mode() const { return mode_; }
  const CostFlags& flags() const { return flags_; }

  // c^j_i(x, m, v, z). Throws zero_size_community when m_i <= 0.
  double eval(std::size_t type, std::size_t i, PointView x,
              const NominalState& state) const;

  // Gradient in x; nullopt where the metric term is not differentiable
  // (x within step_x of a center).
  std::optional<Point> try_grad_x(std::size_t type, std::size_t i, PointView x,
                                  const NominalState& state) const;
  // Same, throwing singular_point instead of returning nullopt.
  Point grad_x(std::size_t type, std::size_t i, PointView x,
               const NominalState& state) const;

  // Partial derivative in the own size m_i.
  double dcost_dm(std::size_t type, std::size_t i, PointView x,
                  const NominalState& state) const;

  // Copy with one scalar parameter replaced. Paths name the first term of
  // a kind, or an indexed one: "fixed_share.g", "metric.scale",
  // "metric[1].exponent", "fee.coefficient", "spillover.kappa",
  // "characteristic.kappa".
  CostModel with_parameter(const std::string& path, double value) const;
  double parameter(const std::string& path) const;

 private:
  double eval_terms(std::size_t type, std::size_t i, PointView x,
                    const NominalState& state) const;
  std::optional<Point> analytic_grad(std::size_t type, std::size_t i,
                                     PointView x, const NominalState& state) const;
  double* resolve(const std::string& path);

  std::size_t communities_ = 0;
  std::vector<CostTerm> terms_;
  GradientMode mode_ = GradientMode::analytic;
  double step_x_ = 1e-5;
  double step_m_ = 1e-5;
  CostFlags flags_;
};

// Benchmark model: scale * ||x - x_i||_p + g_i / m_i (+ fee * z_i[0]).
CostModel metric_fixed_share(std::vector<Point> centers, std::vector<double> g,
                             double scale = 1.0, double exponent = 2.0,
                             std::optional<double> fee_coefficient = std::nullopt);

// Mass of agents within a cost band of width delta around indifference
// between i1 and i2: {x : |c_i1 - c_i2| < delta / 2}. Grid cells are
// resolved by linearizing the cost gap across each cell.
double indifference_gap_measure(const CostModel& model, const SampledMeasure& mu,
                                const NominalState& state, std::size_t i1,
                                std::size_t i2, double delta);

// Upper bound on sup over M_eps and x of min_j c_j(x, m): some community
// always holds at least 1/n, so it suffices to scan c_j with m_j >= 1/n.
double attainable_cost_bound(const CostModel& model, const SampledMeasure& mu,
                             const NominalState& reference);

struct HyperbolaProbe {
  std::size_t i1 = 0;
  std::size_t i2 = 0;
  std::vector<double> m;       // worst probed state
  double clustered_mass = 0.0; // mass of agents indifferent at that state
};

// Searches the size segment between each pair of communities for a state
// at which a positive mass of agents is exactly indifferent: each agent's
// indifference size is located by bisection and the masses are binned.
HyperbolaProbe probe_hyperbola_property(const CostModel& model,
                                        const SampledMeasure& mu,
                                        const NominalState& reference,
                                        double bin_width = 1e-7);

// Per community, the largest m_i^0 (up to 1/n) such that c_i(x, m_i^0, .)
// exceeds `bound` for every sampled x and admissible m_{-i}. Throws
// assumption_violated when no such floor exists.
std::vector<double> small_group_floor(const CostModel& model,
                                      const SampledMeasure& mu, double bound,
                                      const NominalState& reference);
std::vector<double> small_group_floor(const CostModel& model,
                                      const SampledMeasure& mu, double bound);

}  // namespace tiebout
