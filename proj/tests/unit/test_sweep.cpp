#include <doctest.h>

#include <cmath>

#include "instances.hpp"
#include "oracles.hpp"
#include "tiebout/error.hpp"
#include "tiebout/sweep.hpp"

using namespace tiebout;

namespace {

StabilitySettings quick() {
  StabilitySettings s;
  s.weak_trials = 60;
  s.strong_trials = 20;
  return s;
}

}  // namespace

TEST_CASE("plan validation") {
  auto model = testsupport::inst_sq2(0.05);
  SweepPlan plan;
  plan.parameter = "fixed_share.g";
  plan.values = {0.1, 0.2, 0.15};
  CHECK_THROWS_AS(plan.validate(model), Error);
  plan.values = {0.3, 0.2, 0.1};
  CHECK_NOTHROW(plan.validate(model));
  plan.parameter = "nonsense.g";
  CHECK_THROWS_AS(plan.validate(model), Error);
}

TEST_CASE("fixed-cost sweep flips near the analytic threshold") {
  auto mu = testsupport::unit_square(100);
  SweepPlan plan;
  plan.parameter = "fixed_share.g";
  plan.values = {0.3, 0.32, 0.34, 0.36};
  plan.warm_start = WarmStart::continue_from_previous;
  SolverConfig solver;
  solver.size_starts = {{0.5, 0.5}};
  auto s = comparative_statics(testsupport::inst_sq2(0.3), mu, plan, solver, quick());
  REQUIRE(s.rows.size() == 4);
  REQUIRE(s.flips.size() == 1);
  CHECK(s.flips[0].from == Classification::strongly_stable);
  CHECK(s.flips[0].to == Classification::weakly_stable_only);
  CHECK(std::abs(s.flips[0].estimate - oracle::sq2_flip_g()) < 0.01);
  CHECK(s.hypotheses_check == "local");
  // Condition values increase with g.
  double last = -1e9;
  for (const auto& row : s.rows) {
    REQUIRE(row.points.size() == 1);
    CHECK(row.points[0].worst_condition > last);
    last = row.points[0].worst_condition;
  }
  auto weak = weak_stability_regression(s, testsupport::inst_sq2(0.3), mu, quick());
  CHECK(weak.passed());
  CHECK(weak.checked == 4);
}

TEST_CASE("warm starts agree with fresh multistart on the symmetric branch") {
  auto mu = testsupport::unit_square(60);
  SweepPlan plan;
  plan.parameter = "fixed_share.g";
  plan.values = {0.2, 0.4};
  plan.classify = false;
  SolverConfig solver;
  solver.multistart = 4;
  auto fresh = comparative_statics(testsupport::inst_sq2(0.2), mu, plan, solver, quick());
  plan.warm_start = WarmStart::continue_from_previous;
  auto warm = comparative_statics(testsupport::inst_sq2(0.2), mu, plan, solver, quick());
  for (std::size_t r = 0; r < 2; ++r) {
    auto symmetric = [](const SweepRow& row) {
      for (const auto& p : row.points) {
        if (std::abs(p.eq.state.m[0] - 0.5) < 1e-3) return p.eq.state.m[0];
      }
      return -1.0;
    };
    const double a = symmetric(fresh.rows[r]);
    const double b = symmetric(warm.rows[r]);
    REQUIRE(a > 0.0);
    REQUIRE(b > 0.0);
    CHECK(std::abs(a - b) <= 1e-6);
  }
}

TEST_CASE("zero distance scale is skipped") {
  auto mu = testsupport::unit_square(40);
  SweepPlan plan;
  plan.parameter = "metric.scale";
  plan.values = {0.5, 0.0};
  SolverConfig solver;
  solver.size_starts = {{0.5, 0.5}};
  auto s = comparative_statics(testsupport::inst_sq2(0.3), mu, plan, solver, quick());
  REQUIRE(s.rows.size() == 2);
  for (const auto& p : s.rows[1].points) {
    CHECK_FALSE(p.verdict.has_value());
    CHECK_FALSE(p.note.empty());
  }
  auto weak = weak_stability_regression(s, testsupport::inst_sq2(0.3), mu, quick());
  CHECK(weak.skipped >= 1);
  CHECK(weak.passed());
}

TEST_CASE("failed rows do not stop the sweep") {
  auto mu = testsupport::unit_interval(500);
  SweepPlan plan;
  plan.parameter = "fixed_share.g";
  plan.values = {0.1, 0.0};
  plan.classify = false;
  auto s = comparative_statics(testsupport::inst_1d(0.1), mu, plan, SolverConfig{}, quick());
  REQUIRE(s.rows.size() == 2);
  CHECK_FALSE(s.rows[0].failed);
  CHECK(s.rows[1].failed);
  CHECK_FALSE(s.rows[1].error.empty());
}
