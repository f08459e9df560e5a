#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace picert {

// Parsed command-line configuration; flag defaults match --help.
struct RunConfig {
  std::string subcommand;
  std::string problem_path;
  std::string instance;            // reproduce: "lq" or "nonholonomic"
  double gamma = 0.0;              // 0 = use the problem file's discount
  std::vector<double> gamma_sweep; // lo, hi, count
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  double tol = 1e-9;
  int horizon = 200;
  int grid_points = 0;             // 0 = problem default
};

int cmd_solve(const RunConfig& cfg);
int cmd_certify(const RunConfig& cfg);
int cmd_verify(const RunConfig& cfg);
int cmd_reproduce(const RunConfig& cfg);

// Exit codes: 0 success, 1 solver/verification failure, 2 usage or config
// error.
int cli_main(int argc, char** argv);

}  // namespace picert
