#include "tiebout/report.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "tiebout/error.hpp"

namespace tiebout {

using nlohmann::json;

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json point_json(PointView x) { return json(std::vector<double>(x.begin(), x.end())); }

}  // namespace

json to_json(const Residuals& r) {
  return {{"size", r.size},
          {"characteristic", r.characteristic},
          {"agent_max_regret", r.agent_max_regret},
          {"provider_max_regret", r.provider_max_regret}};
}

json to_json(const EquilibriumReport& eq) {
  json j{{"m", eq.state.m},
         {"v", eq.state.v},
         {"z", eq.state.z},
         {"epsilon", eq.state.epsilon},
         {"realized_sizes", eq.partition.sizes},
         {"realized_characteristics", eq.partition.characteristics},
         {"tie_count", eq.partition.tie_count},
         {"residuals", to_json(eq.residuals)},
         {"all_nonempty", eq.all_nonempty},
         {"iterations", eq.iterations},
         {"start_index", eq.start_index}};
  if (!eq.trace.empty()) j["trace"] = eq.trace;
  return j;
}

json to_json(const StartOutcome& s) {
  return {{"start_index", s.start_index}, {"status", to_string(s.status)},
          {"start", s.start},             {"final_m", s.final_m},
          {"residual", s.residual},       {"iterations", s.iterations},
          {"detail", s.detail}};
}

json to_json(const SolveResult& r) {
  json eqs = json::array();
  for (const auto& e : r.equilibria) eqs.push_back(to_json(e));
  json starts = json::array();
  for (const auto& s : r.starts) starts.push_back(to_json(s));
  return {{"equilibria", eqs}, {"starts", starts}, {"small_group_floor", r.small_group_floor}};
}

json to_json(const DeviationCandidate& c, const SampledMeasure& mu) {
  // Members are listed by position for small groups only.
  json j{{"source", c.source},
         {"target", c.target},
         {"member_count", c.members.size()},
         {"mass", c.mass},
         {"origin", c.origin}};
  if (c.members.size() <= 64) {
    json pts = json::array();
    for (std::size_t g : c.members) {
      std::size_t t = 0;
      while (t + 1 < mu.type_count() && g >= mu.offset(t + 1)) ++t;
      pts.push_back(point_json(mu.type(t).point(g - mu.offset(t))));
    }
    j["members"] = pts;
  }
  return j;
}

namespace {

json check_json(const std::optional<DeviationCheck>& c) {
  if (!c) return nullptr;
  return {{"worst_member_gain", c->worst_member_gain}, {"profitable", c->profitable}};
}

}  // namespace

json to_json(const StabilityVerdict& v, const SampledMeasure& mu) {
  json conditions = json::array();
  for (const auto& c : v.conditions) {
    conditions.push_back({{"i", c.i},
                          {"j", c.j},
                          {"integral", c.integral},
                          {"scale_term", c.scale_term},
                          {"sum", c.sum},
                          {"satisfied", c.satisfied},
                          {"windowed", c.windowed},
                          {"windows", c.windows},
                          {"point_border", c.point_border},
                          {"y", c.y}});
  }
  json weak{{"stable", v.weak.stable},
            {"requested_radius", v.weak.requested_radius},
            {"certified_radius", v.weak.certified_radius},
            {"trials", v.weak.trials},
            {"hits_at_requested", v.weak.hits_at_requested},
            {"counterexample_check", check_json(v.weak.counterexample_check)},
            {"notes", v.weak.notes}};
  if (v.weak.counterexample) weak["counterexample"] = to_json(*v.weak.counterexample, mu);
  json strong{{"found", v.strong.found},
              {"candidates_tested", v.strong.candidates_tested},
              {"vacuous", v.strong.vacuous},
              {"warning", v.strong.warning},
              {"counterexample_check", check_json(v.strong.counterexample_check)}};
  if (v.strong.counterexample) strong["counterexample"] = to_json(*v.strong.counterexample, mu);
  return {{"classification", to_string(v.classification)},
          {"weak", weak},
          {"conditions", conditions},
          {"strong", strong},
          {"notes", v.notes}};
}

json to_json(const WelfareSummary& w) {
  json communities = json::array();
  for (const auto& c : w.communities) {
    communities.push_back({{"mass", c.mass},
                           {"total_cost", c.total_cost},
                           {"mean_cost", c.mean_cost},
                           {"max_cost", c.max_cost},
                           {"best_x", c.best_x},
                           {"best_cost", c.best_cost}});
  }
  return {{"total_cost", w.total_cost}, {"communities", communities}};
}

json to_json(const ParetoProbeResult& p) {
  json j{{"improvement_found", p.improvement_found},
         {"trials", p.trials},
         {"out_of_scope", p.out_of_scope},
         {"note", p.note}};
  if (p.replay) {
    j["replay"] = {{"status", to_string(p.replay->status)},
                   {"worse", p.replay->worse},
                   {"better", p.replay->better},
                   {"largest_gain", p.replay->largest_gain},
                   {"largest_loss", p.replay->largest_loss},
                   {"sizes", p.replay->sizes}};
  }
  return j;
}

json to_json(const SweepResult& s) {
  json rows = json::array();
  for (const auto& row : s.rows) {
    json points = json::array();
    for (const auto& p : row.points) {
      json pj{{"branch", p.branch}, {"equilibrium", to_json(p.eq)}, {"note", p.note}};
      if (p.verdict) {
        pj["classification"] = to_string(p.verdict->classification);
        pj["worst_condition"] = p.worst_condition;
        json conds = json::array();
        for (const auto& c : p.verdict->conditions) {
          conds.push_back({{"i", c.i}, {"j", c.j}, {"sum", c.sum}, {"integral", c.integral},
                           {"scale_term", c.scale_term}});
        }
        pj["conditions"] = conds;
        pj["weak_stable"] = p.verdict->weak.stable;
        pj["strong_deviation_found"] = p.verdict->strong.found;
      }
      points.push_back(pj);
    }
    rows.push_back({{"value", row.value}, {"failed", row.failed}, {"error", row.error},
                    {"points", points}});
  }
  json flips = json::array();
  for (const auto& f : s.flips) {
    flips.push_back({{"branch", f.branch},
                     {"lo", f.lo},
                     {"hi", f.hi},
                     {"estimate", f.estimate},
                     {"from", to_string(f.from)},
                     {"to", to_string(f.to)},
                     {"refined", f.refined}});
  }
  return {{"parameter", s.plan.parameter},
          {"warm_start", to_string(s.plan.warm_start)},
          {"rows", rows},
          {"flips", flips},
          {"branch_events", s.branch_events},
          {"hypotheses_check", s.hypotheses_check}};
}

json to_json(const WeakRegression& w) {
  return {{"checked", w.checked},
          {"skipped", w.skipped},
          {"counterexamples", w.counterexamples},
          {"passed", w.passed()},
          {"details", w.details}};
}

NominalState state_from_json(const json& eq, const ExperimentConfig& config) {
  auto vec = [&](const char* key) {
    if (!eq.contains(key) || !eq.at(key).is_array()) {
      fail(ErrorCode::validation, std::string("stored equilibrium lacks '") + key + "'");
    }
    std::vector<double> out;
    for (const auto& x : eq.at(key)) {
      if (!x.is_number()) fail(ErrorCode::validation, std::string("non-numeric '") + key + "'");
      out.push_back(x.get<double>());
    }
    return out;
  };
  const std::size_t n = config.communities();
  NominalState s;
  s.m = vec("m");
  s.v = vec("v");
  s.z = vec("z");
  s.epsilon = eq.value("epsilon", 0.0);
  if (config.extended) {
    auto spec = config.extended->characteristics;
    if (config.measure.types.size() > 1) spec = spec.with_type_shares(config.measure.types.size());
    s.v_layout = spec.layout();
    s.z_layout = config.extended->z_layout();
  } else {
    s.v_layout = BlockLayout::empty(n);
    s.z_layout = BlockLayout::empty(n);
  }
  if (s.m.size() != n || s.v.size() != s.v_layout.total() || s.z.size() != s.z_layout.total()) {
    fail(ErrorCode::validation, "stored equilibrium does not match the config's dimensions");
  }
  return s;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::validation, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) fail(ErrorCode::validation, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string dump_report(const json& report) { return report.dump(2) + "\n"; }

json without_timestamp(json report) {
  if (report.is_object()) report.erase("timestamp");
  return report;
}

void write_partition_csv(std::ostream& out, const SampledMeasure& mu,
                         const std::vector<EquilibriumReport>& equilibria) {
  std::size_t dim = 0;
  for (const auto& t : mu.types()) dim = std::max(dim, t.dimension());
  const std::size_t n = equilibria.empty() ? 0 : equilibria.front().partition.communities;
  out << "equilibrium,type,j";
  for (std::size_t a = 0; a < dim; ++a) out << ",x_" << a + 1;
  out << ",w,label";
  for (std::size_t i = 0; i < n; ++i) out << ",f_" << i + 1;
  out << '\n';
  for (std::size_t e = 0; e < equilibria.size(); ++e) {
    const Partition& p = equilibria[e].partition;
    for (std::size_t t = 0; t < mu.type_count(); ++t) {
      const auto& type = mu.type(t);
      for (std::size_t s = 0; s < type.size(); ++s) {
        const std::size_t g = mu.offset(t) + s;
        out << e << ',' << t << ',' << s;
        const auto x = type.point(s);
        for (std::size_t a = 0; a < dim; ++a) out << ',' << (a < x.size() ? num(x[a]) : "");
        out << ',' << num(type.weights[s]) << ',' << p.labels[g];
        for (std::size_t i = 0; i < n; ++i) out << ',' << num(p.fraction(g, i));
        out << '\n';
      }
    }
  }
}

void write_borders_csv(std::ostream& out, const std::vector<LabelledBorder>& borders) {
  out << "equilibrium,i,j,chain,vertex,x_1,x_2,density,gradient_gap,arc_weight\n";
  for (const auto& lb : borders) {
    const Border& b = lb.border;
    for (std::size_t c = 0; c < b.chains.size(); ++c) {
      for (std::size_t k = 0; k < b.chains[c].size(); ++k) {
        const auto& v = b.chains[c][k];
        out << lb.equilibrium << ',' << b.i << ',' << b.j << ',' << c << ',' << k << ','
            << num(v.x[0]) << ',' << (v.x.size() > 1 ? num(v.x[1]) : "") << ','
            << num(v.density) << ',' << num(v.gradient_gap) << ',' << num(v.arc_weight) << '\n';
      }
    }
  }
}

void write_sweep_csv(std::ostream& out, const SweepResult& sweep, std::size_t n) {
  out << "param,value,branch";
  for (std::size_t i = 0; i < n; ++i) out << ",m_" << i + 1;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) out << ",condition_" << i + 1 << "_" << j + 1;
    }
  }
  out << ",classification,size_residual,agent_max_regret,status\n";
  for (const auto& row : sweep.rows) {
    if (row.failed) {
      out << sweep.plan.parameter << ',' << num(row.value) << ",";
      for (std::size_t k = 0; k < n + n * (n - 1) + 3; ++k) out << ',';
      out << "failed\n";
      continue;
    }
    for (const auto& p : row.points) {
      out << sweep.plan.parameter << ',' << num(row.value) << ',' << p.branch;
      for (double m : p.eq.state.m) out << ',' << num(m);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j) continue;
          out << ',';
          if (!p.verdict) continue;
          for (const auto& c : p.verdict->conditions) {
            if (c.i == i && c.j == j) out << num(c.sum);
          }
        }
      }
      out << ',' << (p.verdict ? to_string(p.verdict->classification) : "") << ','
          << num(p.eq.residuals.size) << ',' << num(p.eq.residuals.agent_max_regret) << ','
          << (p.note.empty() ? "ok" : "skipped") << '\n';
    }
  }
}

void write_locus_csv(std::ostream& out, const std::vector<IndifferenceLocus>& loci) {
  out << "delta_p,kind,polyline,vertex,x_1,x_2\n";
  for (const auto& locus : loci) {
    if (locus.polylines.empty()) {
      out << num(locus.price_difference) << ',' << to_string(locus.kind) << ",,,,\n";
    }
    for (std::size_t c = 0; c < locus.polylines.size(); ++c) {
      const auto& verts = locus.polylines[c].vertices;
      for (std::size_t k = 0; k < verts.size(); ++k) {
        out << num(locus.price_difference) << ',' << to_string(locus.kind) << ',' << c << ','
            << k << ',' << num(verts[k][0]) << ',' << num(verts[k][1]) << '\n';
      }
    }
  }
}

}  // namespace tiebout
