#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tiebout/config.hpp"
#include "tiebout/equilibrium.hpp"
#include "tiebout/partition.hpp"
#include "tiebout/stability.hpp"
#include "tiebout/sweep.hpp"
#include "tiebout/welfare.hpp"

#include <json.hpp>

namespace tiebout {

// JSON views of the library results. Object keys are sorted by the JSON
// library, so equal inputs always serialize to equal bytes.
nlohmann::json to_json(const Residuals& r);
nlohmann::json to_json(const EquilibriumReport& eq);
nlohmann::json to_json(const StartOutcome& s);
nlohmann::json to_json(const SolveResult& r);
nlohmann::json to_json(const DeviationCandidate& c, const SampledMeasure& mu);
nlohmann::json to_json(const StabilityVerdict& v, const SampledMeasure& mu);
nlohmann::json to_json(const WelfareSummary& w);
nlohmann::json to_json(const ParetoProbeResult& p);
nlohmann::json to_json(const SweepResult& s);
nlohmann::json to_json(const WeakRegression& w);

// Rebuilds the nominal state of a stored equilibrium; block layouts come
// from the config.
NominalState state_from_json(const nlohmann::json& eq, const ExperimentConfig& config);

// Writes to a sibling temporary file and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& content);

std::string dump_report(const nlohmann::json& report);

// Report minus its timestamp, for determinism comparisons.
nlohmann::json without_timestamp(nlohmann::json report);

// equilibrium,type,j,x_1..x_k,w,label,f_1..f_n
void write_partition_csv(std::ostream& out, const SampledMeasure& mu,
                         const std::vector<EquilibriumReport>& equilibria);

struct LabelledBorder {
  std::size_t equilibrium = 0;
  Border border;
};

// equilibrium,i,j,chain,vertex,x_1,x_2,density,gradient_gap,arc_weight
void write_borders_csv(std::ostream& out, const std::vector<LabelledBorder>& borders);

// value,branch,m_1..m_n,pair conditions,classification,residuals
void write_sweep_csv(std::ostream& out, const SweepResult& sweep, std::size_t communities);

// delta_p,kind,polyline,vertex,x_1,x_2
void write_locus_csv(std::ostream& out, const std::vector<IndifferenceLocus>& loci);

}  // namespace tiebout
