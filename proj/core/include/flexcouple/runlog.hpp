#pragma once

// Run artifacts: trajectory CSV, run-summary JSON, run manifest.
//
// CSV numbers are formatted with a pinned "%.12g" so identical runs produce
// byte-identical files; solver wall times never appear in CSVs (they are
// the one nondeterministic quantity and live in the JSON summary only).

#include <cstdint>
#include <string>
#include <vector>

#include "flexcouple/sim.hpp"

namespace flexcouple {

std::string format_double(double v);  // pinned "%.12g"
std::string hash_hex(std::uint64_t h);

const char* to_string(PairStatus status);

// One row per robot per logged control period:
// t_s,robot,px_m,py_m,theta_rad,v_mps,w_radps,vdot_mps2,wdot_radps2,phase,
// pair_statuses,converged,sqp_iterations,kkt_residual,cost,pip_violation_max
// pair_statuses joins the registry's status codes with ';' (0 = decoupled,
// 1 = head_aligned, 2 = head_inserted).
std::string trajectory_csv(const RunResult& result);

struct SummaryInfo {
  std::string command;
  std::uint64_t seed{0};
  std::uint64_t config_hash{0};
  double wall_time_s{0.0};
};

std::string run_summary_json(const RunResult& result, const SummaryInfo& info);

struct Manifest {
  std::string command;
  std::string config_path;  // "<default>" when built in
  std::uint64_t seed{0};
  std::string out_dir;
  std::vector<std::string> artifacts;  // file names relative to out_dir
  std::uint64_t config_hash{0};
};

std::string manifest_json(const Manifest& m);

// Create parents as needed; throws std::runtime_error on I/O failure.
void write_text_file(const std::string& path, const std::string& content);

}  // namespace flexcouple
