#include <doctest.h>

#include <cmath>

#include "instances.hpp"
#include "oracles.hpp"
#include "tiebout/error.hpp"
#include "tiebout/welfare.hpp"

using namespace tiebout;

TEST_CASE("total cost of the interval equilibria") {
  auto mu = testsupport::unit_interval(10000);
  auto model = testsupport::inst_1d(0.1);
  auto r = solve_basic(model, mu, SolverConfig{});
  REQUIRE(r.equilibria.size() == 3);
  for (const auto& eq : r.equilibria) {
    const double a = eq.state.m[0];
    auto w = aggregate_welfare(model, mu, eq.partition, eq.state);
    CHECK(std::abs(w.total_cost - oracle::inst_1d_total_cost(0.1, a)) < 1e-3);
    if (std::abs(a - 0.5) < 1e-6) CHECK(std::abs(w.total_cost - 0.45) < 1e-3);
  }
}

TEST_CASE("comparisons against alternative allocations") {
  auto mu = testsupport::unit_interval(1000);
  auto model = testsupport::inst_1d(0.1);
  SolverConfig cfg;
  cfg.size_starts = {{0.5, 0.5}};
  auto eq = solve_basic(model, mu, cfg).equilibria.at(0);

  auto same = compare_allocation(model, mu, eq, eq.partition.labels, 1e-6);
  CHECK(same.status == AllocationComparison::Status::no_improvement);
  CHECK(same.worse == 0);

  std::vector<std::size_t> all_left(mu.size(), 0);
  auto merged = compare_allocation(model, mu, eq, all_left, 1e-6);
  CHECK(merged.status == AllocationComparison::Status::out_of_scope);
  CHECK_FALSE(merged.note.empty());

  // Shift the split: the shrinking community pays more per member.
  std::vector<std::size_t> shifted = eq.partition.labels;
  for (std::size_t s = 0; s < mu.size(); ++s) {
    if (mu.type(0).point(s)[0] > 0.45 && mu.type(0).point(s)[0] < 0.5) shifted[s] = 1;
  }
  auto cmp = compare_allocation(model, mu, eq, shifted, 1e-6);
  CHECK(cmp.status == AllocationComparison::Status::no_improvement);
  CHECK(cmp.worse > 0);
}

TEST_CASE("Pareto probe finds nothing on separable equilibria") {
  auto mu = testsupport::unit_square(60);
  auto model = testsupport::inst_sq2(0.05);
  SolverConfig cfg;
  cfg.size_starts = {{0.5, 0.5}};
  auto eq = solve_basic(model, mu, cfg).equilibria.at(0);
  auto p = pareto_probe(model, mu, eq, 200, 3);
  CHECK_FALSE(p.improvement_found);
  CHECK(p.trials == 200);
  CHECK(p.out_of_scope == 0);
}

TEST_CASE("Pareto probe refuses non-separable costs") {
  auto mu = testsupport::unit_square(30);
  auto model = testsupport::inst_sq2_spillover(0.05, 0.1);
  SolverConfig cfg;
  cfg.size_starts = {{0.5, 0.5}};
  auto eq = solve_basic(model, mu, cfg).equilibria.at(0);
  try {
    pareto_probe(model, mu, eq, 10, 3);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::non_separable_model);
  }
}
