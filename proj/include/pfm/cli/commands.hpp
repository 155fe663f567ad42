#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pfm/cli/run_config.hpp"

namespace pfm::cli {

// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,          // bad flags or config
  kDomain = 2,         // invalid or infeasible inputs
  kCheckFailed = 3,    // an internal check did not pass
  kFormat = 4,         // unreadable or corrupt file
  kLocked = 5,         // output directory in use
  kTrainingFailed = 6, // divergence or stability refusal
};

struct CommandOptions {
  std::string out = "pfm_out";
  std::optional<std::uint64_t> seed;
  std::vector<double> params;  // scale only
  std::string sweep;           // scale only
  bool check = false;
};

// Each command writes its bundle under opts.out and returns an ExitCode.
// Errors propagate as exceptions; run_cli maps them to exit codes.
int cmd_scale(const RunConfig& c, const CommandOptions& opts, std::ostream& log);
int cmd_simulate(const RunConfig& c, const CommandOptions& opts, std::ostream& log);
int cmd_train(const RunConfig& c, const CommandOptions& opts, std::ostream& log);
int cmd_perturb(const RunConfig& c, const CommandOptions& opts, std::ostream& log);
int cmd_ensemble(const RunConfig& c, const CommandOptions& opts, std::ostream& log);

// Entry point of the `pfm` binary. Honors PFM_THREADS.
int run_cli(int argc, char** argv);

}  // namespace pfm::cli
