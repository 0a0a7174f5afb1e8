#pragma once

// Experiment harnesses: coupling success-rate sweep over lateral offsets,
// wiggle-decoupling statistics, and solver-timing scaling.
//
// Trials are independent: each builds its own scenario with a seed derived
// from (base seed, condition index, trial index), so results are identical
// no matter how many workers run them. Aggregates are computed from the
// per-trial array in index order — worker count never changes a CSV byte.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flexcouple/scenario.hpp"
#include "flexcouple/sim.hpp"

namespace flexcouple {

struct TrialResult {
  bool success{false};
  double completion_time{-1.0};      // <= timeout when success
  std::vector<double> solve_times_s;  // planner wall time per control step
  std::vector<PairStatus> final_statuses;
  bool faulted{false};
};

struct OffsetResult {
  double offset_mm{0.0};
  int trials{0};
  int successes{0};
  double success_rate{0.0};
  double mean_time_s{0.0};  // over successful trials; NaN when none
  std::vector<TrialResult> results;  // by trial index
};

// The standard coupling study: robots start 65 mm apart along x, the
// opening-side robot shifted by each lateral offset, both poses perturbed
// by seeded uniform noise (±1 mm, ±0.02 rad). Success = every pair
// connected within timeout. `base` supplies the physical and controller
// parameters; robots/target/schedule are built per trial.
std::vector<OffsetResult> run_coupling_experiment(
    const ScenarioConfig& base, std::span<const double> offsets_mm,
    int trials, double timeout_s, std::uint64_t seed, int workers = 1);

struct DecoupleResult {
  int trials{0};
  int successes{0};
  double success_rate{0.0};
  double mean_time_s{0.0};  // over successful trials; NaN when none
  std::vector<TrialResult> results;
};

// The standard decoupling study: pair starts coupled at the nominal mating
// pose (plus seeded noise), the anchor owner runs the open-loop wiggle.
// Success = pair ejected within timeout.
DecoupleResult run_decoupling_experiment(const ScenarioConfig& base,
                                         int trials, double timeout_s,
                                         std::uint64_t seed, int workers = 1);

struct TimingCell {
  int robots{0};
  int horizon{0};
  int constraint_horizon{3};
  double median_solve_ms{0.0};  // measured wall time; JSON summary only
  int sqp_iterations{0};        // deterministic; these go in the CSV
  int qp_iterations{0};
  int solves{0};
};

// Cold-solve wall-time medians over a (robot count x horizon) grid: chain
// of robots 65 mm apart under the line-coupling behavior, no inter-robot
// constraint rows (pure scaling). Always single-threaded. Wall times are
// excluded from the CSV so identical (config, seed) reruns stay
// byte-identical; the JSON summary carries the measured milliseconds.
std::vector<TimingCell> run_timing_benchmark(const ScenarioConfig& base,
                                             std::span<const int> robot_counts,
                                             std::span<const int> horizons,
                                             int solves_per_cell = 5);

// Plot-ready CSVs (pinned formatting, one row per condition).
std::string coupling_csv(std::span<const OffsetResult> results);
std::string decoupling_csv(const DecoupleResult& result);
std::string timing_csv(std::span<const TimingCell> cells);

// Trial scenario builders (exposed for tests).
ScenarioConfig make_coupling_trial(const ScenarioConfig& base,
                                   double offset_m, double timeout_s,
                                   std::uint64_t trial_seed);
ScenarioConfig make_decoupling_trial(const ScenarioConfig& base,
                                     double timeout_s,
                                     std::uint64_t trial_seed);

}  // namespace flexcouple
