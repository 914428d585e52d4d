#include "tiebout/cli.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "tiebout/equilibrium.hpp"
#include "tiebout/random.hpp"
#include "tiebout/report.hpp"
#include "tiebout/stability.hpp"
#include "tiebout/sweep.hpp"
#include "tiebout/welfare.hpp"

namespace tiebout {

using nlohmann::json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::validation:
    case ErrorCode::support_empty:
    case ErrorCode::rejection_rate_exceeded:
    case ErrorCode::empty_feasible_set:
      return exit_validation;
    case ErrorCode::no_convergence:
    case ErrorCode::cycling_detected:
      return exit_no_convergence;
    default:
      return exit_assumption;
  }
}

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json diagnostics_json(const std::vector<Diagnostic>& diags) {
  json out = json::array();
  for (const auto& d : diags) {
    out.push_back({{"severity", d.severity}, {"code", d.code}, {"message", d.message}});
  }
  return out;
}

Diagnostic from_error(const Error& e, const std::string& severity = "error") {
  return {severity, std::string(to_string(e.code())), e.what()};
}

// Sizes 1/n, characteristics 1/2 and provider parameters at their box
// centers.
NominalState reference_state(const ExperimentConfig& c) {
  const std::size_t n = c.communities();
  NominalState s = NominalState::sizes_only(std::vector<double>(n, 1.0 / n));
  s.v_layout = BlockLayout::empty(n);
  s.z_layout = BlockLayout::empty(n);
  if (c.extended) {
    auto spec = c.extended->characteristics;
    if (c.measure.types.size() > 1) spec = spec.with_type_shares(c.measure.types.size());
    s.v_layout = spec.layout();
    s.v.assign(s.v_layout.total(), 0.5);
    s.z_layout = c.extended->z_layout();
    for (const auto& box : c.extended->boxes) {
      for (std::size_t a = 0; a < box.lo.size(); ++a) s.z.push_back(0.5 * (box.lo[a] + box.hi[a]));
    }
  }
  return s;
}

NominalState with_m(NominalState s, std::vector<double> m) {
  s.m = std::move(m);
  return s;
}

struct Context {
  const CliOptions& options;
  std::ostream& log;
  ExperimentConfig config;
  SampledMeasure mu;
  std::filesystem::path out;
  json report;
  std::vector<Diagnostic> diagnostics;
};

SolveResult solve(Context& ctx) {
  const auto& c = ctx.config;
  ctx.log << "solving " << (c.extended ? "extended" : "basic") << " model with "
          << c.communities() << " communities on " << ctx.mu.size() << " samples\n";
  SolveResult r = c.extended ? solve_extended(c.model, *c.extended, ctx.mu, c.solver)
                             : solve_basic(c.model, ctx.mu, c.solver);
  ctx.report["solve"] = to_json(r);
  ctx.log << r.equilibria.size() << " equilibria\n";
  for (const auto& eq : r.equilibria) {
    ctx.log << "  m =";
    for (double m : eq.state.m) ctx.log << ' ' << m;
    ctx.log << "  size residual " << eq.residuals.size << "  agent regret "
            << eq.residuals.agent_max_regret << '\n';
  }
  return r;
}

void write_text(Context& ctx, const std::string& name, const std::string& content) {
  write_atomic(ctx.out / name, content);
  ctx.log << "wrote " << (ctx.out / name).string() << '\n';
}

int cmd_solve(Context& ctx) {
  const SolveResult r = solve(ctx);
  std::ostringstream csv;
  write_partition_csv(csv, ctx.mu, r.equilibria);
  write_text(ctx, "partition.csv", csv.str());
  return exit_ok;
}

int cmd_stability(Context& ctx) {
  const auto& c = ctx.config;
  const SolveResult r = solve(ctx);
  json verdicts = json::array();
  for (std::size_t e = 0; e < r.equilibria.size(); ++e) {
    const auto& eq = r.equilibria[e];
    if (gradient_gap_vanishes(c.model, ctx.mu, eq.state)) {
      verdicts.push_back({{"equilibrium", e}, {"skipped", "cost gradient gap vanishes"}});
      ctx.diagnostics.push_back({"warning", "degenerate_gradient",
                                 "equilibrium " + std::to_string(e) +
                                     ": borders are not regular, stability not classified"});
      continue;
    }
    try {
      auto v = classify_stability(c.model, ctx.mu, eq, c.stability);
      ctx.log << "  equilibrium " << e << ": " << to_string(v.classification) << '\n';
      json j = to_json(v, ctx.mu);
      j["equilibrium"] = e;
      verdicts.push_back(std::move(j));
    } catch (const Error& err) {
      verdicts.push_back({{"equilibrium", e}, {"error", std::string(to_string(err.code()))}});
      ctx.diagnostics.push_back(from_error(err, "warning"));
    }
  }
  ctx.report["stability"] = verdicts;
  return exit_ok;
}

int cmd_welfare(Context& ctx) {
  const auto& c = ctx.config;
  const SolveResult r = solve(ctx);
  json out = json::array();
  bool refused = false;
  for (std::size_t e = 0; e < r.equilibria.size(); ++e) {
    const auto& eq = r.equilibria[e];
    json j{{"equilibrium", e},
           {"welfare", to_json(aggregate_welfare(c.model, ctx.mu, eq.partition, eq.state))}};
    try {
      j["pareto_probe"] = to_json(pareto_probe(c.model, ctx.mu, eq, c.welfare.pareto_trials,
                                               c.welfare.seed, c.welfare.tolerance,
                                               ctx.options.threads));
    } catch (const Error& err) {
      if (err.code() != ErrorCode::non_separable_model) throw;
      j["pareto_probe"] = {{"refused", std::string(to_string(err.code()))}, {"reason", err.what()}};
      if (!refused) ctx.diagnostics.push_back(from_error(err, "warning"));
      refused = true;
    }
    ctx.log << "  equilibrium " << e << ": total cost " << j["welfare"]["total_cost"].get<double>()
            << '\n';
    out.push_back(std::move(j));
  }
  ctx.report["welfare"] = out;
  return exit_ok;
}

int cmd_sweep(Context& ctx) {
  const auto& c = ctx.config;
  if (!c.sweep) fail(ErrorCode::validation, "config has no sweep section");
  if (c.extended) fail(ErrorCode::validation, "sweeps run on the basic model only");
  ctx.log << "sweeping " << c.sweep->parameter << " over " << c.sweep->values.size()
          << " values\n";
  const SweepResult s = comparative_statics(c.model, ctx.mu, *c.sweep, c.solver, c.stability);
  const WeakRegression w = weak_stability_regression(s, c.model, ctx.mu, c.stability);
  ctx.report["sweep"] = to_json(s);
  ctx.report["weak_regression"] = to_json(w);
  for (const auto& f : s.flips) {
    ctx.log << "  branch " << f.branch << ": " << to_string(f.from) << " -> " << to_string(f.to)
            << " near " << f.estimate << '\n';
  }
  std::ostringstream csv;
  write_sweep_csv(csv, s, c.communities());
  write_text(ctx, "sweep.csv", csv.str());
  return exit_ok;
}

int cmd_plotdata(Context& ctx) {
  const auto& c = ctx.config;
  const SolveResult r = solve(ctx);
  std::ostringstream partition;
  write_partition_csv(partition, ctx.mu, r.equilibria);
  write_text(ctx, "partition.csv", partition.str());

  std::vector<LabelledBorder> borders;
  for (std::size_t e = 0; e < r.equilibria.size(); ++e) {
    try {
      for (auto& b : adjacent_borders(c.model, ctx.mu, r.equilibria[e], c.stability.borders)) {
        borders.push_back({e, std::move(b)});
      }
    } catch (const Error& err) {
      ctx.diagnostics.push_back(from_error(err, "warning"));
    }
  }
  std::ostringstream bcsv;
  write_borders_csv(bcsv, borders);
  write_text(ctx, "borders.csv", bcsv.str());

  if (ctx.options.locus || c.output.locus) {
    LocusConfig locus = c.output.locus.value_or(LocusConfig{});
    if (!ctx.options.delta_p.empty()) locus.delta_p = ctx.options.delta_p;
    std::vector<IndifferenceLocus> loci;
    json summary = json::array();
    for (double dp : locus.delta_p) {
      loci.push_back(indifference_locus(locus.c1, locus.c2, dp, locus.box, locus.resolution));
      summary.push_back({{"delta_p", dp},
                         {"kind", to_string(loci.back().kind)},
                         {"polylines", loci.back().polylines.size()}});
    }
    ctx.report["locus"] = summary;
    std::ostringstream lcsv;
    write_locus_csv(lcsv, loci);
    write_text(ctx, "locus.csv", lcsv.str());
  }
  return exit_ok;
}

int cmd_verify(Context& ctx, const json& stored) {
  const auto& c = ctx.config;
  if (!stored.contains("solve") || !stored["solve"].contains("equilibria")) {
    fail(ErrorCode::validation, "report has no equilibria to verify");
  }
  const double tol = c.solver.tolerance;
  json results = json::array();
  bool ok = true;
  std::size_t e = 0;
  for (const auto& stored_eq : stored["solve"]["equilibria"]) {
    EquilibriumReport rep;
    rep.state = state_from_json(stored_eq, c);
    const Residuals res = verify_equilibrium(c.model, ctx.mu, rep,
                                             c.extended ? &*c.extended : nullptr,
                                             c.solver.provider_probe_points, ctx.options.threads);
    double total = 0.0;
    bool floor_ok = true;
    for (double m : rep.state.m) {
      total += m;
      floor_ok = floor_ok && m >= c.solver.epsilon_min;
    }
    std::vector<std::string> failures;
    if (!(res.size <= tol)) failures.push_back("size residual");
    if (!(res.characteristic <= tol)) failures.push_back("characteristic residual");
    if (!(res.agent_max_regret <= tol)) failures.push_back("agent regret");
    if (!(res.provider_max_regret <= tol)) failures.push_back("provider regret");
    if (std::abs(total - 1.0) > 1e-9) failures.push_back("sizes do not sum to 1");
    if (!floor_ok) failures.push_back("a community is below epsilon_min");
    for (const auto& f : failures) {
      ctx.diagnostics.push_back({"error", "verification_failed",
                                 "equilibrium " + std::to_string(e) + ": " + f + " exceeds " +
                                     std::to_string(tol)});
    }
    ok = ok && failures.empty();
    results.push_back({{"equilibrium", e}, {"residuals", to_json(res)}, {"passed", failures.empty()}});
    ctx.log << "  equilibrium " << e << ": " << (failures.empty() ? "passed" : "FAILED")
            << " (size " << res.size << ", agent regret " << res.agent_max_regret << ")\n";
    ++e;
  }
  ctx.report["verify"] = results;
  return ok ? exit_ok : exit_assumption;
}

}  // namespace

std::vector<Diagnostic> validate_experiment(const ExperimentConfig& c, std::size_t threads) {
  std::vector<Diagnostic> out;
  SampledMeasure mu;
  try {
    mu = c.measure.build();
  } catch (const Error& e) {
    out.push_back(from_error(e));
    return out;
  }
  const std::size_t n = c.communities();
  const NominalState ref = reference_state(c);

  try {
    const double bound = attainable_cost_bound(c.model, mu, ref);
    const auto floor = small_group_floor(c.model, mu, 2.0 * bound, ref);
    std::ostringstream msg;
    msg << "small-group floor at twice the attainable cost " << 2.0 * bound << ":";
    for (double f : floor) msg << ' ' << f;
    out.push_back({"info", "small_group_floor", msg.str()});
  } catch (const Error& e) {
    if (e.code() != ErrorCode::assumption_violated) throw;
    out.push_back({"warning", "assumption_violated",
                   std::string("small-group ineffectiveness fails: ") + e.what()});
  }

  if (n < 2) return out;
  // Probe states: configured ones, the barycenter, then random draws.
  std::vector<std::vector<double>> states = c.diagnostics.states;
  states.emplace_back(n, 1.0 / n);
  Rng rng(c.diagnostics.seed);
  const double eps = c.solver.initial_epsilon(n);
  for (std::size_t k = 0; k < c.diagnostics.random_states; ++k) {
    states.push_back(project_to_restricted_simplex(rng.dirichlet(n), eps));
  }
  const double delta = *std::min_element(c.diagnostics.deltas.begin(), c.diagnostics.deltas.end());
  bool flagged = false;
  for (const auto& m : states) {
    const NominalState s = with_m(ref, m);
    for (std::size_t i1 = 0; i1 < n && !flagged; ++i1) {
      for (std::size_t i2 = i1 + 1; i2 < n && !flagged; ++i2) {
        const double gap = indifference_gap_measure(c.model, mu, s, i1, i2, delta);
        // A regular border gives gap ~ delta; mass that stays put as delta
        // shrinks is a set of indifferent agents.
        if (gap >= 0.01 && gap >= 100.0 * delta) {
          std::ostringstream msg;
          msg << "hyperbola-property violation detected at probed state m =";
          for (double x : m) msg << ' ' << x;
          msg << ": mass " << gap << " within cost band " << delta << " of indifference between "
              << i1 << " and " << i2;
          out.push_back({"warning", "hyperbola_property", msg.str()});
          flagged = true;
        }
      }
    }
  }
  if (!flagged) {
    const HyperbolaProbe probe = probe_hyperbola_property(c.model, mu, ref);
    if (probe.clustered_mass >= 0.01) {
      std::ostringstream msg;
      msg << "hyperbola-property violation detected at probed state m =";
      for (double x : probe.m) msg << ' ' << x;
      msg << ": mass " << probe.clustered_mass << " indifferent between " << probe.i1 << " and "
          << probe.i2;
      out.push_back({"warning", "hyperbola_property", msg.str()});
    }
  }
  (void)threads;
  return out;
}

int run_command(const CliOptions& options, std::ostream& log) {
  static const std::set<std::string> commands{"solve",   "verify",   "stability", "welfare",
                                              "sweep",   "plotdata", "validate"};
  if (!commands.count(options.command)) {
    log << "unknown command '" << options.command << "'\n";
    return exit_validation;
  }
  json report{{"tool", "tiebout"}, {"command", options.command}, {"timestamp", utc_timestamp()}};
  std::vector<Diagnostic> diagnostics;
  std::filesystem::path out = options.out.value_or("out");
  int code = exit_ok;

  auto finish = [&](int status) {
    report["diagnostics"] = diagnostics_json(diagnostics);
    report["exit_code"] = status;
    report["status"] = status == exit_ok ? "ok" : "failed";
    for (const auto& d : diagnostics) {
      if (d.severity != "info") log << d.severity << " [" << d.code << "]: " << d.message << '\n';
    }
    try {
      const char* name = options.command == "verify"   ? "verify.json"
                         : options.command == "validate" ? "validate.json"
                                                         : "report.json";
      write_atomic(out / name, dump_report(report));
      log << "wrote " << (out / name).string() << '\n';
    } catch (const std::exception& e) {
      log << "error: " << e.what() << '\n';
    }
    return status;
  };

  json stored;
  ExperimentConfig config;
  try {
    if (options.command == "verify") {
      if (!options.report) fail(ErrorCode::validation, "verify needs --report");
      std::ifstream in(*options.report);
      if (!in) fail(ErrorCode::validation, "cannot read report " + options.report->string());
      try {
        stored = json::parse(in);
      } catch (const json::parse_error& e) {
        fail(ErrorCode::validation, std::string("report is not valid JSON: ") + e.what());
      }
      if (!options.config.empty()) {
        config = load_config(options.config);
      } else if (stored.contains("config")) {
        config = parse_config(stored["config"]);
      } else {
        fail(ErrorCode::validation, "report carries no config; pass --config");
      }
    } else {
      if (options.config.empty()) fail(ErrorCode::validation, "--config is required");
      config = load_config(options.config);
    }
  } catch (const Error& e) {
    diagnostics.push_back(from_error(e));
    return finish(exit_code_for(e.code()));
  }
  if (!options.out) out = config.output.dir;
  config.solver.threads = options.threads;
  config.stability.threads = options.threads;
  config.solver.allow_empty = config.solver.allow_empty || options.allow_empty;
  config.solver.trace = options.trace;
  report["config"] = config.source;

  if (options.command == "validate") {
    try {
      diagnostics = validate_experiment(config, options.threads);
    } catch (const Error& e) {
      diagnostics.push_back(from_error(e));
      return finish(exit_code_for(e.code()));
    }
    bool warned = false;
    for (const auto& d : diagnostics) {
      if (d.severity == "error") return finish(exit_validation);
      warned = warned || d.severity == "warning";
    }
    if (!warned) log << "config passes all checks\n";
    return finish(warned ? exit_assumption : exit_ok);
  }

  Context ctx{options, log, std::move(config), {}, out, std::move(report), {}};
  try {
    ctx.mu = ctx.config.measure.build();
    if (options.command == "solve") code = cmd_solve(ctx);
    else if (options.command == "stability") code = cmd_stability(ctx);
    else if (options.command == "welfare") code = cmd_welfare(ctx);
    else if (options.command == "sweep") code = cmd_sweep(ctx);
    else if (options.command == "plotdata") code = cmd_plotdata(ctx);
    else code = cmd_verify(ctx, stored);
  } catch (const Error& e) {
    ctx.diagnostics.push_back(from_error(e));
    code = exit_code_for(e.code());
  }
  report = std::move(ctx.report);
  diagnostics = std::move(ctx.diagnostics);
  return finish(code);
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Equilibrium, stability and welfare analysis of local public good economies"};
  app.require_subcommand(1);
  CliOptions options;
  std::string out;
  std::string report;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("-c,--config", options.config, "experiment config (JSON)");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--out", out, "output directory (default: output.dir of the config)");
    sub->add_option("-t,--threads", options.threads, "worker threads")->check(CLI::Range(1, 256));
    sub->add_flag("--allow-empty", options.allow_empty, "accept equilibria with empty communities");
    sub->add_flag("--trace", options.trace, "record the size iterates of every start");
  };
  add_common(app.add_subcommand("solve", "compute equilibria"), true);
  auto* verify = app.add_subcommand("verify", "re-check the equilibria of a stored report");
  add_common(verify, false);
  verify->add_option("-r,--report", report, "report.json to verify")->required()->check(CLI::ExistingFile);
  add_common(app.add_subcommand("stability", "classify the stability of each equilibrium"), true);
  add_common(app.add_subcommand("welfare", "aggregate costs and probe for Pareto improvements"), true);
  add_common(app.add_subcommand("sweep", "comparative statics along the config's sweep"), true);
  auto* plot = app.add_subcommand("plotdata", "partition, border and indifference-locus CSVs");
  add_common(plot, true);
  plot->add_flag("--locus", options.locus, "emit indifference loci for a price-difference list");
  plot->add_option("--delta-p", options.delta_p, "price differences for --locus");
  add_common(app.add_subcommand("validate", "check a config without solving"), true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e);
    return status == 0 ? exit_ok : exit_validation;
  }
  options.command = app.get_subcommands().front()->get_name();
  if (!out.empty()) options.out = out;
  if (!report.empty()) options.report = report;
  return run_command(options, std::cerr);
}

}  // namespace tiebout
