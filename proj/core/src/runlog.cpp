#include "flexcouple/runlog.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace flexcouple {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string hash_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

const char* to_string(PairStatus status) {
  switch (status) {
    case PairStatus::decoupled: return "decoupled";
    case PairStatus::head_aligned: return "head_aligned";
    case PairStatus::head_inserted: return "head_inserted";
  }
  return "?";
}

std::string trajectory_csv(const RunResult& result) {
  std::string out =
      "t_s,robot,px_m,py_m,theta_rad,v_mps,w_radps,vdot_mps2,wdot_radps2,"
      "phase,pair_statuses,converged,sqp_iterations,kkt_residual,cost,"
      "pip_violation_max\n";
  for (const StepRecord& rec : result.log) {
    std::string statuses;
    for (std::size_t p = 0; p < rec.statuses.size(); ++p) {
      if (p) statuses += ';';
      statuses += std::to_string(static_cast<int>(rec.statuses[p]));
    }
    for (std::size_t r = 0; r < rec.states.size(); ++r) {
      const RobotState& s = rec.states[r];
      const ControlInput& u = rec.controls[r];
      out += format_double(rec.t);
      out += ',' + std::to_string(r);
      out += ',' + format_double(s.px);
      out += ',' + format_double(s.py);
      out += ',' + format_double(s.theta);
      out += ',' + format_double(s.v);
      out += ',' + format_double(s.w);
      out += ',' + format_double(u.vdot);
      out += ',' + format_double(u.wdot);
      out += ',' + std::to_string(rec.phase);
      out += ',' + statuses;
      out += ',' + std::to_string(rec.solver.converged ? 1 : 0);
      out += ',' + std::to_string(rec.solver.iterations);
      out += ',' + format_double(rec.solver.kkt_residual);
      out += ',' + format_double(rec.solver.cost);
      out += ',' + format_double(rec.solver.max_pip_violation);
      out += '\n';
    }
  }
  return out;
}

std::string run_summary_json(const RunResult& result,
                             const SummaryInfo& info) {
  nlohmann::json j;
  j["command"] = info.command;
  j["seed"] = info.seed;
  j["config_hash"] = hash_hex(info.config_hash);
  j["wall_time_s"] = info.wall_time_s;
  j["end_time_s"] = result.end_time;
  j["all_connected"] = result.all_connected;
  j["connect_time_s"] = result.connect_time;
  j["decouple_time_s"] = result.decouple_time;
  j["failsafe_abort"] = result.failsafe_abort;
  j["max_pip_violation"] = result.max_pip_violation;

  int solves = 0, converged = 0;
  double solve_wall = 0.0;
  for (const StepRecord& rec : result.log) {
    if (rec.solver.iterations == 0 && !rec.solver.converged) continue;
    ++solves;
    if (rec.solver.converged) ++converged;
    solve_wall += rec.solver.wall_time_s;
  }
  j["solver"] = {{"solves", solves},
                 {"converged", converged},
                 {"total_wall_time_s", solve_wall}};

  nlohmann::json events = nlohmann::json::array();
  for (const WorldEvent& e : result.events)
    events.push_back(
        {{"t_s", e.time}, {"pair", e.pair}, {"kind", to_string(e.kind)}});
  j["events"] = events;

  nlohmann::json statuses = nlohmann::json::array();
  for (PairStatus s : result.final_statuses) statuses.push_back(to_string(s));
  j["final_statuses"] = statuses;
  return j.dump(2) + "\n";
}

std::string manifest_json(const Manifest& m) {
  nlohmann::json j;
  j["command"] = m.command;
  j["config"] = m.config_path;
  j["seed"] = m.seed;
  j["out_dir"] = m.out_dir;
  j["artifacts"] = m.artifacts;
  j["config_hash"] = hash_hex(m.config_hash);
  return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
    if (ec)
      throw std::runtime_error("cannot create directory '" +
                               p.parent_path().string() + "': " + ec.message());
  }
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace flexcouple
