#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "instances.hpp"
#include "oracles.hpp"
#include "tiebout/equilibrium.hpp"
#include "tiebout/error.hpp"

using namespace tiebout;

namespace {

std::vector<double> first_sizes(const SolveResult& r) {
  std::vector<double> out;
  for (const auto& e : r.equilibria) out.push_back(e.state.m[0]);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("multistart points lie on the restricted simplex") {
  auto pts = multistart_points(3, 20, 0.02, 5);
  REQUIRE(pts.size() == 20);
  for (const auto& m : pts) {
    double total = 0.0;
    for (double x : m) {
      CHECK(x >= 0.02 - 1e-15);
      total += x;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(pts == multistart_points(3, 20, 0.02, 5));
}

TEST_CASE("interval instance: analytic fixed-point set") {
  auto mu = testsupport::unit_interval(2000);
  SolverConfig cfg;
  for (double g : {0.1, 0.3}) {
    CAPTURE(g);
    auto r = solve_basic(testsupport::inst_1d(g), mu, cfg);
    const auto expected = oracle::inst_1d_fixed_points(g);
    const auto got = first_sizes(r);
    REQUIRE(got.size() == expected.size());
    for (std::size_t k = 0; k < got.size(); ++k) CHECK(std::abs(got[k] - expected[k]) < 1e-3);
    for (const auto& e : r.equilibria) {
      CHECK(e.residuals.size <= 1e-6);
      CHECK(e.residuals.agent_max_regret <= 1e-6);
      CHECK(e.all_nonempty);
    }
  }
}

TEST_CASE("explicit size starts replace the multistart") {
  auto mu = testsupport::unit_interval(2000);
  SolverConfig cfg;
  cfg.size_starts = {{0.45, 0.55}};
  auto r = solve_basic(testsupport::inst_1d(0.1), mu, cfg);
  REQUIRE(r.equilibria.size() == 1);
  CHECK(r.equilibria[0].state.m[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(r.starts.size() == 1);
}

TEST_CASE("square instance includes the symmetric state") {
  auto mu = testsupport::unit_square(60);
  SolverConfig cfg;
  cfg.multistart = 6;
  auto r = solve_basic(testsupport::inst_sq2(0.05), mu, cfg);
  bool found = false;
  for (const auto& e : r.equilibria) found = found || std::abs(e.state.m[0] - 0.5) < 1e-4;
  CHECK(found);
}

TEST_CASE("a missing fixed share is reported before solving") {
  auto mu = testsupport::unit_interval(500);
  try {
    solve_basic(testsupport::inst_1d(0.0), mu, SolverConfig{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::assumption2_unverified);
  }
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  cfg.epsilon_floor = 0.6;
  CHECK_THROWS_AS(cfg.validate(2), Error);
  cfg = SolverConfig{};
  cfg.damping = 0.0;
  CHECK_THROWS_AS(cfg.validate(2), Error);
}

TEST_CASE("Sperner cells bracket the analytic fixed points") {
  auto mu = testsupport::unit_interval(2000);
  auto k = kkm_oracle(testsupport::inst_1d(0.1), mu, 0.02, 256);
  CHECK_FALSE(k.assumption2_violated);
  const auto fixed = oracle::inst_1d_fixed_points(0.1);
  for (double a : fixed) {
    bool bracketed = false;
    for (const auto& cell : k.cells) {
      const double lo = std::min(cell.vertices[0][0], cell.vertices[1][0]);
      const double hi = std::max(cell.vertices[0][0], cell.vertices[1][0]);
      bracketed = bracketed || (lo - 1e-3 <= a && a <= hi + 1e-3);
    }
    CHECK(bracketed);
  }
}

TEST_CASE("symmetric instance at small depth") {
  auto mu = testsupport::unit_interval(500);
  auto k = kkm_oracle(testsupport::inst_1d(0.3), mu, 0.02, 2);
  bool half = false;
  for (const auto& cell : k.cells) {
    const double lo = std::min(cell.vertices[0][0], cell.vertices[1][0]);
    const double hi = std::max(cell.vertices[0][0], cell.vertices[1][0]);
    half = half || (lo <= 0.5 && 0.5 <= hi);
  }
  CHECK(half);
}

TEST_CASE("Sperner search without a fixed share is flagged") {
  auto mu = testsupport::unit_interval(500);
  auto k = kkm_oracle(testsupport::inst_1d(0.0), mu, 0.02, 64);
  CHECK(k.assumption2_violated);
}
