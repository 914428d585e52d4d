#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tiebout/cli.hpp"
#include "tiebout/report.hpp"

using namespace tiebout;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "tiebout_cli_test" / name;
  fs::remove_all(dir);
  return dir;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

int run(const std::string& command, const std::string& config, const fs::path& out,
        std::optional<fs::path> report = std::nullopt) {
  CliOptions o;
  o.command = command;
  if (!config.empty()) o.config = fs::path(TIEBOUT_CONFIG_DIR) / config;
  o.out = out;
  o.report = report;
  std::ostringstream log;
  const int code = run_command(o, log);
  MESSAGE(log.str());
  return code;
}

// A small interval instance keeps these tests quick.
fs::path small_config(const fs::path& dir) {
  std::ifstream in(fs::path(TIEBOUT_CONFIG_DIR) / "inst_1d.json");
  auto j = nlohmann::json::parse(in);
  j["measure"]["resolution"] = 2000;
  fs::create_directories(dir);
  const auto path = dir / "config.json";
  std::ofstream(path) << j.dump(2);
  return path;
}

}  // namespace

TEST_CASE("solve lists the three interval equilibria and verifies") {
  const auto dir = scratch("solve");
  CliOptions o;
  o.command = "solve";
  o.config = small_config(dir);
  o.out = dir / "out";
  std::ostringstream log;
  REQUIRE(run_command(o, log) == exit_ok);
  const auto report = read_json(dir / "out" / "report.json");
  CHECK(report["solve"]["equilibria"].size() == 3);
  CHECK(report["exit_code"] == 0);
  CHECK(fs::exists(dir / "out" / "partition.csv"));

  CHECK(run("verify", "", dir / "verify", dir / "out" / "report.json") == exit_ok);

  // Perturb one size by hand.
  auto edited = report;
  edited["solve"]["equilibria"][0]["m"][0] = edited["solve"]["equilibria"][0]["m"][0].get<double>() + 0.01;
  edited["solve"]["equilibria"][0]["m"][1] = edited["solve"]["equilibria"][0]["m"][1].get<double>() - 0.01;
  std::ofstream(dir / "edited.json") << edited.dump();
  CHECK(run("verify", "", dir / "verify2", dir / "edited.json") == exit_assumption);
  const auto v = read_json(dir / "verify2" / "verify.json");
  bool regret = false;
  for (const auto& d : v["diagnostics"]) {
    regret = regret || d["message"].get<std::string>().find("regret") != std::string::npos;
  }
  CHECK(regret);
}

TEST_CASE("identical runs give identical reports") {
  const auto dir = scratch("determinism");
  const auto config = small_config(dir);
  CliOptions o;
  o.command = "solve";
  o.config = config;
  std::ostringstream log;
  o.out = dir / "a";
  REQUIRE(run_command(o, log) == exit_ok);
  o.out = dir / "b";
  o.threads = 3;
  REQUIRE(run_command(o, log) == exit_ok);
  CHECK(without_timestamp(read_json(dir / "a" / "report.json")) ==
        without_timestamp(read_json(dir / "b" / "report.json")));
}

TEST_CASE("validate diagnostics") {
  CHECK(run("validate", "inst_sq2.json", scratch("v_sq2")) == exit_ok);
  const auto flat_dir = scratch("v_flat");
  CHECK(run("validate", "inst_1d_flat.json", flat_dir) == exit_assumption);
  auto flat = read_json(flat_dir / "validate.json");
  bool hyperbola = false;
  for (const auto& d : flat["diagnostics"]) hyperbola = hyperbola || d["code"] == "hyperbola_property";
  CHECK(hyperbola);
  const auto g0_dir = scratch("v_g0");
  CHECK(run("validate", "inst_1d_g0.json", g0_dir) == exit_assumption);
  auto g0 = read_json(g0_dir / "validate.json");
  bool floor = false;
  for (const auto& d : g0["diagnostics"]) floor = floor || d["code"] == "assumption_violated";
  CHECK(floor);
}

TEST_CASE("bad configs exit with the validation status") {
  const auto dir = scratch("bad");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << R"({"measure": {}})";
  CliOptions o;
  o.command = "solve";
  o.config = dir / "bad.json";
  o.out = dir / "out";
  std::ostringstream log;
  CHECK(run_command(o, log) == exit_validation);
  auto r = read_json(dir / "out" / "report.json");
  CHECK(r["diagnostics"][0]["code"] == "validation");
}

TEST_CASE("missing fixed share exits with the assumption status") {
  CHECK(run("solve", "inst_1d_g0.json", scratch("g0_solve")) == exit_assumption);
}

TEST_CASE("plot data with indifference loci") {
  const auto dir = scratch("plot");
  CliOptions o;
  o.command = "plotdata";
  o.config = fs::path(TIEBOUT_CONFIG_DIR) / "inst_sq2.json";
  o.out = dir;
  o.locus = true;
  o.delta_p = {0.0, 0.3, 0.5};
  std::ostringstream log;
  REQUIRE(run_command(o, log) == exit_ok);
  auto r = read_json(dir / "report.json");
  REQUIRE(r["locus"].size() == 3);
  CHECK(r["locus"][0]["kind"] == "line");
  CHECK(r["locus"][1]["kind"] == "hyperbola");
  CHECK(r["locus"][2]["kind"] == "ray");
  CHECK(fs::exists(dir / "borders.csv"));
  CHECK(fs::exists(dir / "locus.csv"));
}

TEST_CASE("the installed binary reports usage errors") {
  const std::string cmd = std::string(TIEBOUT_CLI) + " solve > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == exit_validation);
}
