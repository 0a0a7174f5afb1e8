#pragma once

// Command-line front end. Exit codes:
//   0  success
//   1  pip-check found a predicate/oracle disagreement
//   2  configuration or usage error
//   3  planner fail-safe termination
// Every run writes out/manifest.json before exiting (config errors included,
// as long as the output directory is usable).

#include <string>
#include <vector>

namespace flexcouple {

int run_cli(int argc, const char* const* argv);

// Test convenience: args without the program name, e.g. {"simulate", "--out",
// "runs/a"}.
int run_cli(const std::vector<std::string>& args);

}  // namespace flexcouple
