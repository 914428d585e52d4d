#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "instances.hpp"
#include "tiebout/report.hpp"

using namespace tiebout;

TEST_CASE("equilibrium JSON round trip of the state") {
  auto mu = testsupport::unit_interval(200);
  SolverConfig cfg;
  cfg.size_starts = {{0.5, 0.5}};
  auto r = solve_basic(testsupport::inst_1d(0.1), mu, cfg);
  auto j = to_json(r);
  REQUIRE(j["equilibria"].size() == 1);
  CHECK(j["starts"][0]["status"] == "converged");

  ExperimentConfig c;
  c.model = testsupport::inst_1d(0.1);
  auto s = state_from_json(j["equilibria"][0], c);
  CHECK(s.m == r.equilibria[0].state.m);
  // Serialization is stable.
  CHECK(dump_report(to_json(r)) == dump_report(j));
}

TEST_CASE("timestamps are excluded from comparisons") {
  nlohmann::json a{{"timestamp", "x"}, {"value", 1}};
  nlohmann::json b{{"timestamp", "y"}, {"value", 1}};
  CHECK(without_timestamp(a) == without_timestamp(b));
}

TEST_CASE("atomic writes replace the file") {
  const auto dir = std::filesystem::temp_directory_path() / "tiebout_report_test";
  std::filesystem::remove_all(dir);
  write_atomic(dir / "a.txt", "one");
  write_atomic(dir / "a.txt", "two");
  std::ifstream in(dir / "a.txt");
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "two");
  CHECK_FALSE(std::filesystem::exists(dir / "a.txt.tmp"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("CSV headers") {
  auto mu = testsupport::unit_interval(4);
  SolverConfig cfg;
  cfg.size_starts = {{0.5, 0.5}};
  cfg.epsilon_floor = 0.02;
  auto r = solve_basic(testsupport::inst_1d(0.1), testsupport::unit_interval(200), cfg);
  std::ostringstream p;
  write_partition_csv(p, testsupport::unit_interval(200), r.equilibria);
  CHECK(p.str().rfind("equilibrium,type,j,x_1,w,label,f_1,f_2\n", 0) == 0);
  std::ostringstream l;
  write_locus_csv(l, {indifference_locus({0.25, 0.5}, {0.75, 0.5}, 0.0, Box{{0, 0}, {1, 1}})});
  CHECK(l.str().rfind("delta_p,kind,polyline,vertex,x_1,x_2\n", 0) == 0);
  CHECK(l.str().find(",line,") != std::string::npos);
}
