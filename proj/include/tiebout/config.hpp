#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tiebout/costs.hpp"
#include "tiebout/equilibrium.hpp"
#include "tiebout/measure.hpp"
#include "tiebout/stability.hpp"
#include "tiebout/sweep.hpp"

#include <json.hpp>

namespace tiebout {

struct MeasureConfig {
  enum class Method { grid, monte_carlo };
  std::vector<TypeSpace> types;
  Method method = Method::grid;
  std::size_t resolution = 200;  // cells per axis, or Monte-Carlo samples
  std::uint64_t seed = 1;

  SampledMeasure build() const;
};

struct WelfareConfig {
  std::size_t pareto_trials = 200;
  std::uint64_t seed = 3;
  double tolerance = 1e-6;
};

struct LocusConfig {
  Point c1{0.25, 0.5};
  Point c2{0.75, 0.5};
  std::vector<double> delta_p{0.0, 0.3, 0.5};
  Box box{{0.0, 0.0}, {1.0, 1.0}};
  std::size_t resolution = 200;
};

struct OutputConfig {
  std::string dir = "out";
  std::optional<LocusConfig> locus;
};

// States probed by `validate` in addition to its own random draws.
struct DiagnosticsConfig {
  std::size_t random_states = 8;
  std::vector<std::vector<double>> states;
  std::vector<double> deltas{1e-2, 1e-3, 1e-4};
  std::uint64_t seed = 11;
};

struct ExperimentConfig {
  nlohmann::json source;  // the config as read, echoed into reports
  MeasureConfig measure;
  CostModel model;
  std::optional<ExtendedSpec> extended;  // present when providers are declared
  SolverConfig solver;
  StabilitySettings stability;
  WelfareConfig welfare;
  std::optional<SweepPlan> sweep;
  OutputConfig output;
  DiagnosticsConfig diagnostics;

  std::size_t communities() const { return model.communities(); }
};

// Throws Error(validation) with the offending JSON path on schema errors
// and inconsistent cross-references.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace tiebout
