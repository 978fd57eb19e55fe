#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace kacrice {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitInputError = 1,
  kExitRampFailed = 2,
  kExitCapReached = 3,
  kExitOracleUnavailable = 4,
};

/// Effective settings of one run. Every field has a default; `echo`
/// prints them all so an output header reproduces the run.
struct RunConfig {
  std::string command;  // integrate, partition, search, oracle, crn-reduce
  std::string input;
  std::uint64_t seed = 1;
  unsigned workers = 1;  // KACRICE_WORKERS sets the default

  // Stopping rule.
  double rel_err = 1e-2;
  std::optional<double> min_plausible, max_plausible;
  double max_n = 1e12;
  double max_n_per_box = 1e9;
  bool antithetic = false;
  std::optional<double> sigma;

  std::vector<std::string> linear;  // empty: the system file's choice
  std::vector<double> box;          // lo hi pairs; empty: the system file's box

  // Partition and search.
  std::vector<int> grid;
  std::vector<double> delta;
  std::vector<int> depth;
  double m_min = 1.0, m_max = 3.0;
  std::string mode = "general";
  double tol = 0.05;
  bool keep_both = false;
  std::string format = "csv";
  std::string output;  // empty: standard output
  std::vector<std::string> axes;  // names or indices; default the first two

  double oracle_n = 1e6;
  std::vector<std::size_t> columns;  // crn reduce

  std::string echo() const;
};

int cmd_integrate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_partition(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_search(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_oracle(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_crn_reduce(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Parses arguments and dispatches; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kacrice
