// Acceptance run: one [PASS]/[FAIL] line per criterion, exit status 1 if
// any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "instances.hpp"
#include "oracles.hpp"
#include "tiebout/cli.hpp"
#include "tiebout/equilibrium.hpp"
#include "tiebout/error.hpp"
#include "tiebout/report.hpp"
#include "tiebout/stability.hpp"
#include "tiebout/sweep.hpp"
#include "tiebout/welfare.hpp"

using namespace tiebout;
namespace fs = std::filesystem;

namespace {

std::size_t g_threads = 1;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " FAILED: " << what << ';';
    }
  }
};

std::string fmt(double x, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

std::string vec(const std::vector<double>& v, int digits = 6) {
  std::string s = "(";
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + fmt(v[k], digits);
  return s + ")";
}

SolverConfig solver() {
  SolverConfig c;
  c.threads = g_threads;
  return c;
}

StabilitySettings stability(std::size_t weak = 500, std::size_t strong = 200) {
  StabilitySettings s;
  s.weak_trials = weak;
  s.strong_trials = strong;
  s.threads = g_threads;
  return s;
}

// -- shared suite ------------------------------------------------------------

struct Case {
  std::string name;
  CostModel model;
  const SampledMeasure* mu = nullptr;
  std::optional<ExtendedSpec> spec;
  std::vector<EquilibriumReport> equilibria;
  std::string error;
};

struct Suite {
  SampledMeasure line = testsupport::unit_interval(10000);
  SampledMeasure square = testsupport::unit_square(200);
  SampledMeasure square100 = testsupport::unit_square(100);
  std::vector<Case> cases;
  bool built = false;

  void build() {
    if (built) return;
    built = true;
    for (double g : {0.05, 0.1, 0.2, 0.3}) {
      Case c{"INST-1D g=" + fmt(g), testsupport::inst_1d(g), &line, {}, {}, {}};
      run_basic(c);
      cases.push_back(std::move(c));
    }
    for (double g : {0.05, 1.0}) {
      Case c{"INST-SQ2 g=" + fmt(g), testsupport::inst_sq2(g), &square, {}, {}, {}};
      run_basic(c);
      cases.push_back(std::move(c));
    }
    auto lloyd = testsupport::inst_lloyd(2, {0.3, 0.4, 0.7, 0.6});
    cases.push_back(run_extended("INST-LLOYD", lloyd));
    cases.push_back(run_extended("fee game", testsupport::inst_fee_game()));
    cases.push_back(run_extended("single community", testsupport::inst_lloyd(1, {0.3, 0.4})));
  }

  void run_basic(Case& c) {
    try {
      c.equilibria = solve_basic(c.model, *c.mu, solver()).equilibria;
    } catch (const Error& e) {
      c.error = e.what();
    }
  }

  Case run_extended(const std::string& name, testsupport::Extended inst) {
    Case c{name, inst.model, &square100, inst.spec, {}, {}};
    inst.solver.threads = g_threads;
    try {
      c.equilibria = solve_extended(inst.model, inst.spec, square100, inst.solver).equilibria;
    } catch (const Error& e) {
      c.error = e.what();
    }
    return c;
  }

  const Case& get(const std::string& name) {
    build();
    for (const auto& c : cases) {
      if (c.name == name) return c;
    }
    throw std::runtime_error("no suite case " + name);
  }
};

Suite suite;

// -- criteria ---------------------------------------------------------------

void analytic_recovery(Outcome& o) {
  for (double g : {0.05, 0.1, 0.2, 0.3}) {
    const Case& c = suite.get("INST-1D g=" + fmt(g));
    o.require(c.error.empty(), "solve failed: " + c.error);
    std::vector<double> got;
    for (const auto& e : c.equilibria) got.push_back(e.state.m[0]);
    std::sort(got.begin(), got.end());
    const auto expected = oracle::inst_1d_fixed_points(g);
    bool match = got.size() == expected.size();
    for (std::size_t k = 0; match && k < got.size(); ++k) {
      match = std::abs(got[k] - expected[k]) <= 1e-3;
    }
    o.detail << " g=" << g << ": " << vec(got, 7);
    o.require(match, "g=" + fmt(g) + " expected " + vec(expected, 7));
  }
}

void residual_certification(Outcome& o) {
  suite.build();
  std::size_t count = 0;
  for (const auto& c : suite.cases) {
    o.require(c.error.empty(), c.name + ": " + c.error);
    for (const auto& e : c.equilibria) {
      ++count;
      const double lowest = *std::min_element(e.state.m.begin(), e.state.m.end());
      const bool ok = e.residuals.size <= 1e-6 && e.residuals.agent_max_regret <= 1e-6 &&
                      lowest >= SolverConfig{}.epsilon_min;
      o.require(ok, c.name + " m=" + vec(e.state.m) + " size " + fmt(e.residuals.size) +
                        " regret " + fmt(e.residuals.agent_max_regret));
    }
  }
  o.detail << " " << count << " equilibria across " << suite.cases.size() << " instances";
}

void kkm_agreement(Outcome& o) {
  const Case& c = suite.get("INST-1D g=0.1");
  const double eps = 0.02;
  const std::size_t depth = 2048;
  const KkmResult k = kkm_oracle(c.model, *c.mu, eps, depth, g_threads);
  const double width = (1.0 - 2.0 * eps) / static_cast<double>(depth);
  auto span = [](const KkmCell& cell) {
    double lo = 1.0, hi = 0.0;
    for (const auto& v : cell.vertices) {
      lo = std::min(lo, v[0]);
      hi = std::max(hi, v[0]);
    }
    return std::pair{lo, hi};
  };
  for (const auto& e : c.equilibria) {
    bool inside = false;
    for (const auto& cell : k.cells) {
      auto [lo, hi] = span(cell);
      inside = inside || (lo - 1e-12 <= e.state.m[0] && e.state.m[0] <= hi + 1e-12);
    }
    o.require(inside, "fixed point " + fmt(e.state.m[0]) + " outside every labelled cell");
  }
  double worst = 0.0;
  for (const auto& cell : k.cells) {
    auto [lo, hi] = span(cell);
    double nearest = 1e9;
    for (const auto& e : c.equilibria) {
      const double a = e.state.m[0];
      nearest = std::min(nearest, a < lo ? lo - a : (a > hi ? a - hi : 0.0));
    }
    worst = std::max(worst, nearest / width);
  }
  o.require(worst <= 2.0, "a labelled cell lies " + fmt(worst) + " cells from every fixed point");
  o.detail << " " << k.cells.size() << " fully labelled cells, farthest " << fmt(worst)
           << " cells from a fixed point";
}

void continuity_and_floor(Outcome& o) {
  const auto& mu = suite.square;
  const auto model = testsupport::inst_sq2(0.05);
  const NominalState base = NominalState::sizes_only({0.5, 0.5});
  const auto f0 = size_map(model, mu, base, g_threads);
  std::vector<double> constants;
  for (double d : {1e-2, 1e-3, 1e-4}) {
    const auto f = size_map(model, mu, NominalState::sizes_only({0.5 + d, 0.5 - d}), g_threads);
    constants.push_back(sup_norm_distance(f, f0) / d);
  }
  const double hi = *std::max_element(constants.begin(), constants.end());
  const double lo = *std::min_element(constants.begin(), constants.end());
  o.detail << " C(delta)=" << vec(constants, 4);
  o.require(lo > 0.0 && hi / lo <= 3.0, "fitted constants vary by more than a factor 3");

  const double bound = attainable_cost_bound(model, mu, base);
  const auto floor = small_group_floor(model, mu, 2.0 * bound, base);
  o.detail << "; floor " << vec(floor, 4) << " at A=" << fmt(2.0 * bound, 4);
  for (std::size_t i = 0; i < 2; ++i) {
    for (double frac : {0.999, 0.5, 0.1}) {
      std::vector<double> m(2);
      m[i] = frac * floor[i];
      m[1 - i] = 1.0 - m[i];
      const auto f = size_map(model, mu, NominalState::sizes_only(m), g_threads);
      o.require(f[i] == 0.0, "f_" + std::to_string(i) + " = " + fmt(f[i]) + " below the floor");
    }
  }
}

void hyperbola_diagnostic(Outcome& o) {
  const auto model = testsupport::inst_sq2(0.05);
  const NominalState half = NominalState::sizes_only({0.5, 0.5});
  std::vector<double> ratios;
  for (double d : {1e-2, 1e-3, 1e-4, 1e-5}) {
    ratios.push_back(indifference_gap_measure(model, suite.square, half, 0, 1, d) / d);
  }
  o.detail << " ratios " << vec(ratios, 5);
  o.require(std::abs(ratios.back() - 0.74) <= 0.05 && std::abs(ratios[2] - 0.74) <= 0.05,
            "gap ratio does not settle at 0.74");

  const auto flat = testsupport::inst_1d_flat();
  const double m1 = oracle::flat_state_m1();
  const NominalState state = NominalState::sizes_only({m1, 1.0 - m1});
  double least = 1.0;
  for (double d : {1e-3, 1e-4, 1e-5, 1e-6, 1e-8}) {
    least = std::min(least, indifference_gap_measure(flat, suite.line, state, 0, 1, d));
  }
  o.detail << "; flat state m1=" << fmt(m1) << " smallest gap mass " << fmt(least);
  o.require(least >= 0.19, "flat gap measure below 0.19");
}

void weak_suite(Outcome& o) {
  // One-dimensional equilibria are excluded: with a point border the gain
  // and loss of a small group are of the same order, so the ball argument
  // does not apply there.
  std::size_t checked = 0;
  for (const char* name : {"INST-SQ2 g=0.05", "INST-SQ2 g=1", "INST-LLOYD", "fee game"}) {
    const Case& c = suite.get(name);
    for (const auto& e : c.equilibria) {
      const auto w = weak_stability_search(c.model, *c.mu, e, 0.02, 500, 7, 0.02 / 64, g_threads);
      ++checked;
      o.require(w.hits_at_requested == 0, std::string(name) + " m=" + vec(e.state.m) + ": " +
                                              std::to_string(w.hits_at_requested) +
                                              " profitable balls at radius 0.02");
    }
  }
  o.detail << " " << checked << " equilibria, 500 trials each";
}

const SweepPoint* symmetric_point(const SweepRow& row) {
  for (const auto& p : row.points) {
    if (std::abs(p.eq.state.m[0] - 0.5) < 1e-3) return &p;
  }
  return nullptr;
}

SweepResult symmetric_sweep(const CostModel& model, const std::string& parameter,
                            std::vector<double> values, const StabilitySettings& s) {
  SweepPlan plan;
  plan.parameter = parameter;
  plan.values = std::move(values);
  plan.warm_start = WarmStart::continue_from_previous;
  SolverConfig cfg = solver();
  cfg.size_starts = {{0.5, 0.5}};
  return comparative_statics(model, suite.square, plan, cfg, s);
}

void strong_threshold(Outcome& o) {
  const Case& c = suite.get("INST-SQ2 g=0.05");
  const EquilibriumReport* sym = nullptr;
  for (const auto& e : c.equilibria) {
    if (std::abs(e.state.m[0] - 0.5) < 1e-6) sym = &e;
  }
  o.require(sym != nullptr, "no symmetric equilibrium");
  if (sym == nullptr) return;
  const auto cond = strong_stability_condition(c.model, *c.mu, *sym, 0, 1);
  o.detail << " integral " << fmt(cond.integral) << " (oracle "
           << fmt(oracle::sq2_border_integral()) << ")";
  o.require(std::abs(cond.integral - oracle::sq2_border_integral()) <= 0.01,
            "border integral off the oracle");

  const auto sweep = symmetric_sweep(testsupport::inst_sq2(0.02), "fixed_share.g",
                                     {0.02, 0.05, 0.1, 0.2, 0.3, 0.32, 0.34, 0.36, 0.4, 0.6, 1.0},
                                     stability(200, 100));
  std::vector<const FlipPoint*> flips;
  for (const auto& f : sweep.flips) flips.push_back(&f);
  o.require(flips.size() == 1, std::to_string(flips.size()) + " flips on the symmetric branch");
  if (flips.size() == 1) {
    o.detail << "; flip " << to_string(flips[0]->from) << " -> " << to_string(flips[0]->to)
             << " at g*=" << fmt(flips[0]->estimate, 5) << " (oracle " << fmt(oracle::sq2_flip_g(), 5)
             << ")";
    o.require(flips[0]->from == Classification::strongly_stable &&
                  flips[0]->to == Classification::weakly_stable_only,
              "wrong flip direction");
    o.require(std::abs(flips[0]->estimate - 0.338) <= 0.01, "flip away from 0.338");
  }

  const Case& big = suite.get("INST-SQ2 g=1");
  for (const auto& e : big.equilibria) {
    const auto s = strong_stability_search(big.model, *big.mu, e, 0.05, 200, 7, g_threads);
    o.require(s.found, "no profitable strip at g=1, m=" + vec(e.state.m));
    if (s.found) {
      const auto replay = verify_deviation(big.model, *big.mu, e, *s.counterexample);
      o.detail << "; g=1 strip mass " << fmt(s.counterexample->mass, 4) << " replay min gain "
               << fmt(replay.worst_member_gain, 4);
      o.require(replay.profitable && replay.worst_member_gain > 0.0, "replay not profitable");
    }
  }
}

void comparative_statics_check(Outcome& o) {
  std::vector<double> lambdas;
  for (int k = 20; k >= 1; --k) lambdas.push_back(0.05 * k);
  const auto sweep = symmetric_sweep(testsupport::inst_sq2(0.3), "metric.scale", lambdas,
                                     stability(200, 100));
  double reference = 0.0, worst_scaling = 0.0;
  std::size_t mismatched = 0, classified = 0;
  for (const auto& row : sweep.rows) {
    const SweepPoint* p = symmetric_point(row);
    o.require(p != nullptr && p->verdict.has_value(), "lambda=" + fmt(row.value) + " unclassified");
    if (p == nullptr || !p->verdict) continue;
    ++classified;
    double integral = 0.0;
    for (const auto& c : p->verdict->conditions) integral = std::max(integral, c.integral);
    if (row.value == 1.0) reference = integral;
    if (reference > 0.0) {
      worst_scaling = std::max(worst_scaling, std::abs(integral * row.value / reference - 1.0));
    }
    const bool strong = p->verdict->classification == Classification::strongly_stable;
    const bool oracle_strong = oracle::sq2_condition(0.3, row.value) < 0.0;
    if (strong != oracle_strong) ++mismatched;
  }
  o.detail << " lambda-sweep: integral*lambda within " << fmt(100 * worst_scaling, 3)
           << "% of lambda=1";
  o.require(worst_scaling <= 0.02, "integral does not scale as 1/lambda within 2%");
  o.require(mismatched == 0, std::to_string(mismatched) + " points classified against the "
                                                          "side of the flip");
  for (const auto& f : sweep.flips) {
    o.detail << ", flip at lambda*=" << fmt(f.estimate, 4) << " (oracle "
             << fmt(oracle::sq2_flip_lambda(0.3), 4) << ")";
  }
  const auto weak = weak_stability_regression(sweep, testsupport::inst_sq2(0.3), suite.square,
                                              stability(500));
  o.detail << "; weak regression " << weak.checked << " checked, " << weak.counterexamples
           << " counterexamples";
  o.require(weak.passed() && weak.checked == classified, "weak stability lost on the sweep");

  const auto tail = symmetric_sweep(testsupport::inst_sq2(0.02), "fixed_share.g",
                                    {0.02, 0.01, 0.005, 0.002, 0.001}, stability(200, 100));
  std::size_t strong = 0;
  for (const auto& row : tail.rows) {
    const SweepPoint* p = symmetric_point(row);
    if (p && p->verdict && p->verdict->classification == Classification::strongly_stable) ++strong;
  }
  o.detail << "; g->0 tail " << strong << "/" << tail.rows.size() << " strongly stable";
  o.require(strong == tail.rows.size(), "g->0 tail not strongly stable throughout");
}

void pareto(Outcome& o) {
  suite.build();
  std::size_t probed = 0;
  for (const auto& c : suite.cases) {
    if (!c.model.flags().separable) continue;
    for (const auto& e : c.equilibria) {
      const auto p = pareto_probe(c.model, *c.mu, e, 200, 3, 1e-6, g_threads);
      ++probed;
      o.require(!p.improvement_found, c.name + " m=" + vec(e.state.m) + ": improvement found");
    }
  }
  o.detail << " " << probed << " equilibria, 200 trials each, no improvement";
  auto spill = testsupport::inst_sq2_spillover(0.05, 0.1);
  SolverConfig cfg = solver();
  cfg.size_starts = {{0.5, 0.5}};
  const auto& mu = suite.square100;
  const auto eq = solve_basic(spill, mu, cfg).equilibria.at(0);
  bool refused = false;
  try {
    pareto_probe(spill, mu, eq, 10, 3);
  } catch (const Error& e) {
    refused = e.code() == ErrorCode::non_separable_model;
    o.detail << "; spillover model refused: " << to_string(e.code());
  }
  o.require(refused, "spillover model was not refused");
}

void extended_model(Outcome& o) {
  const Case& lloyd = suite.get("INST-LLOYD");
  o.require(lloyd.error.empty() && lloyd.equilibria.size() >= 1, "Lloyd: " + lloyd.error);
  for (const auto& e : lloyd.equilibria) {
    const auto target = oracle::lloyd_centers();
    std::vector<double> mirrored = {target[2], target[3], target[0], target[1]};
    const double d = std::min(sup_norm_distance(e.state.z, target), sup_norm_distance(e.state.z, mirrored));
    o.detail << " Lloyd z=" << vec(e.state.z) << " m=" << vec(e.state.m);
    o.require(d <= 1e-3 && std::abs(e.state.m[0] - 0.5) <= 1e-3, "Lloyd off the centroids");
  }
  const Case& fee = suite.get("fee game");
  o.require(fee.error.empty() && fee.equilibria.size() >= 1, "fee game: " + fee.error);
  for (const auto& e : fee.equilibria) {
    o.detail << "; fee z=" << vec(e.state.z) << " provider regret "
             << fmt(e.residuals.provider_max_regret, 3);
    o.require(e.residuals.provider_max_regret <= 1e-6, "fee game provider regret");
  }
  const Case& one = suite.get("single community");
  o.require(one.error.empty() && one.equilibria.size() == 1, "n=1: " + one.error);
  for (const auto& e : one.equilibria) {
    o.detail << "; n=1 z=" << vec(e.state.z);
    o.require(std::abs(e.state.z[0] - 0.5) <= 1e-4 && std::abs(e.state.z[1] - 0.5) <= 1e-4,
              "n=1 off the centroid");
  }
}

void determinism(Outcome& o) {
  const fs::path dir = fs::temp_directory_path() / "tiebout_acceptance_determinism";
  fs::remove_all(dir);
  for (const char* command : {"solve", "stability"}) {
    const std::string config = std::string(command) == "solve" ? "inst_1d.json" : "inst_sq2.json";
    nlohmann::json reports[2];
    for (int k = 0; k < 2; ++k) {
      CliOptions opt;
      opt.command = command;
      opt.config = fs::path(TIEBOUT_CONFIG_DIR) / config;
      opt.out = dir / (std::string(command) + std::to_string(k));
      opt.threads = g_threads;
      std::ostringstream log;
      const int code = run_command(opt, log);
      o.require(code == exit_ok, std::string(command) + " exited " + std::to_string(code));
      std::ifstream in(*opt.out / "report.json");
      reports[k] = nlohmann::json::parse(in);
    }
    const bool same = dump_report(without_timestamp(reports[0])) ==
                      dump_report(without_timestamp(reports[1]));
    o.detail << " " << command << " on " << config << (same ? ": identical" : ": DIFFERENT") << ';';
    o.require(same, std::string(command) + " reports differ");
  }
  fs::remove_all(dir);
}

}  // namespace

int main(int argc, char** argv) {
  for (int k = 1; k + 1 < argc; ++k) {
    if (std::strcmp(argv[k], "--threads") == 0) g_threads = std::max(1, std::atoi(argv[k + 1]));
  }
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"1 analytic equilibrium recovery", analytic_recovery},
      {"2 non-emptiness and residual certification", residual_certification},
      {"3 Sperner oracle agreement", kkm_agreement},
      {"4 size-map continuity and small-group floor", continuity_and_floor},
      {"5 hyperbola diagnostic", hyperbola_diagnostic},
      {"6 weak stability on the suite", weak_suite},
      {"7 strong stability condition and threshold", strong_threshold},
      {"8 comparative statics", comparative_statics_check},
      {"9 Pareto probe", pareto},
      {"10 extended model", extended_model},
      {"11 determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      run(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %s (%.1fs):%s\n", o.pass ? "PASS" : "FAIL", name.c_str(), secs,
                o.detail.str().c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
