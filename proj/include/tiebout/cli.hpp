#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tiebout/config.hpp"
#include "tiebout/error.hpp"

#include <json.hpp>

namespace tiebout {

enum ExitCode : int {
  exit_ok = 0,
  exit_validation = 2,
  exit_no_convergence = 3,
  exit_assumption = 4,
};

int exit_code_for(ErrorCode code);

struct CliOptions {
  std::string command;  // solve, verify, stability, welfare, sweep, plotdata, validate
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;  // defaults to the config's output.dir
  std::optional<std::filesystem::path> report;  // verify: the report to re-check
  std::size_t threads = 1;
  bool allow_empty = false;
  bool trace = false;
  bool locus = false;
  std::vector<double> delta_p;  // overrides output.locus.delta_p
};

struct Diagnostic {
  std::string severity;  // error, warning, info
  std::string code;
  std::string message;
};

// Assumption spot checks on a parsed config; never solves.
std::vector<Diagnostic> validate_experiment(const ExperimentConfig& config, std::size_t threads = 1);

// Runs one subcommand, writes its artifacts and returns the exit status.
// Progress and diagnostics go to `log`.
int run_command(const CliOptions& options, std::ostream& log);

// Parses argv with CLI11 and dispatches to run_command.
int run_cli(int argc, char** argv);

}  // namespace tiebout
