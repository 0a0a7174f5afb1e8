#include "flexcouple/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "flexcouple/rng.hpp"
#include "flexcouple/runlog.hpp"

namespace flexcouple {
namespace {

void add_pose_noise(ScenarioConfig& cfg, std::uint64_t seed) {
  UniformRng rng(seed);
  for (Pose2& p : cfg.robots) {
    p.position.x += rng.symmetric(0.001);
    p.position.y += rng.symmetric(0.001);
    p.heading += rng.symmetric(0.02);
  }
}

TrialResult run_trial(const ScenarioConfig& cfg, bool decouple) {
  TrialResult tr;
  const RunResult rr = run_scenario(cfg);
  const double done = decouple ? rr.decouple_time : rr.connect_time;
  tr.success = done >= 0.0 && !rr.failsafe_abort;
  tr.completion_time = tr.success ? done : -1.0;
  tr.final_statuses = rr.final_statuses;
  for (const StepRecord& rec : rr.log)
    if (rec.solver.iterations > 0)
      tr.solve_times_s.push_back(rec.solver.wall_time_s);
  for (const WorldEvent& e : rr.events)
    if (e.kind == WorldEvent::Kind::fault) tr.faulted = true;
  return tr;
}

// Run `count` independent trials on `workers` threads; results land in a
// slot array by trial index, so scheduling never affects the outcome.
template <typename MakeCfg>
std::vector<TrialResult> run_trials(int count, int workers, bool decouple,
                                    MakeCfg&& make_cfg) {
  std::vector<TrialResult> results(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      results[static_cast<std::size_t>(i)] = run_trial(make_cfg(i), decouple);
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  return results;
}

double mean_success_time(const std::vector<TrialResult>& trials) {
  double sum = 0.0;
  int n = 0;
  for (const TrialResult& t : trials) {
    if (!t.success) continue;
    sum += t.completion_time;
    ++n;
  }
  return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

ScenarioConfig make_coupling_trial(const ScenarioConfig& base, double offset_m,
                                   double timeout_s,
                                   std::uint64_t trial_seed) {
  ScenarioConfig cfg = base;  // physical + controller parameters carry over
  cfg.seed = trial_seed;
  cfg.robots = {Pose2{{0.0, 0.0}, 0.0}, Pose2{{-0.065, offset_m}, 0.0}};
  cfg.target.slots = {Pose2{{0.0, 0.0}, 0.0}, Pose2{{-0.045, 0.0}, 0.0}};
  cfg.target.pairs = {{0, Face::back, 1, Face::front}};
  cfg.preconnected.clear();
  PhaseSpec align;
  align.kind = PhaseKind::align;
  align.duration_s = timeout_s;
  align.stop_when_connected = true;
  cfg.schedule = {align};
  add_pose_noise(cfg, trial_seed);
  return cfg;
}

ScenarioConfig make_decoupling_trial(const ScenarioConfig& base,
                                     double timeout_s,
                                     std::uint64_t trial_seed) {
  ScenarioConfig cfg = base;
  cfg.seed = trial_seed;
  cfg.robots = {Pose2{{0.0, 0.0}, 0.0}, Pose2{{-0.045, 0.0}, 0.0}};
  cfg.target.slots = cfg.robots;
  cfg.target.pairs = {{0, Face::back, 1, Face::front}};
  cfg.preconnected = {0};
  PhaseSpec wig;
  wig.kind = PhaseKind::wiggle;
  wig.duration_s = timeout_s;
  wig.wiggle_robots = {0};  // the anchor owner shakes itself free
  wig.stop_when_decoupled = true;
  cfg.schedule = {wig};
  add_pose_noise(cfg, trial_seed);
  return cfg;
}

std::vector<OffsetResult> run_coupling_experiment(
    const ScenarioConfig& base, std::span<const double> offsets_mm, int trials,
    double timeout_s, std::uint64_t seed, int workers) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  std::vector<OffsetResult> out(offsets_mm.size());
  for (std::size_t oi = 0; oi < offsets_mm.size(); ++oi) {
    OffsetResult& res = out[oi];
    res.offset_mm = offsets_mm[oi];
    res.trials = trials;
    res.results = run_trials(trials, workers, /*decouple=*/false, [&](int t) {
      return make_coupling_trial(base, offsets_mm[oi] * 1e-3, timeout_s,
                                 derive_seed(seed, oi, static_cast<std::uint64_t>(t)));
    });
    for (const TrialResult& t : res.results)
      if (t.success) ++res.successes;
    res.success_rate = static_cast<double>(res.successes) / trials;
    res.mean_time_s = mean_success_time(res.results);
  }
  return out;
}

DecoupleResult run_decoupling_experiment(const ScenarioConfig& base,
                                         int trials, double timeout_s,
                                         std::uint64_t seed, int workers) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  DecoupleResult out;
  out.trials = trials;
  out.results = run_trials(trials, workers, /*decouple=*/true, [&](int t) {
    return make_decoupling_trial(base, timeout_s,
                                 derive_seed(seed, 0, static_cast<std::uint64_t>(t)));
  });
  for (const TrialResult& t : out.results)
    if (t.success) ++out.successes;
  out.success_rate = static_cast<double>(out.successes) / trials;
  out.mean_time_s = mean_success_time(out.results);
  return out;
}

std::vector<TimingCell> run_timing_benchmark(const ScenarioConfig& base,
                                             std::span<const int> robot_counts,
                                             std::span<const int> horizons,
                                             int solves_per_cell) {
  if (solves_per_cell < 1)
    throw std::invalid_argument("solves_per_cell must be >= 1");
  const RobotFootprint& fp = base.footprint;
  std::vector<TimingCell> cells;
  for (int n : robot_counts) {
    if (n < 2) throw std::invalid_argument("robot counts must be >= 2");
    // Chain along x, each head on the next mouth plane (coupling starts).
    std::vector<RobotState> states;
    for (int r = 0; r < n; ++r)
      states.push_back({-0.065 * r, 0.0, 0.0, 0.0, 0.0});
    BehaviorSpec spec;
    spec.kind = BehaviorKind::connect;
    for (int r = 0; r + 1 < n; ++r) {
      AlignTerm term;
      term.a = {r, fp.connection_offset(Face::back),
                face_normal_angle(Face::back)};
      term.b = {r + 1, fp.connection_offset(Face::front),
                wrap_angle(face_normal_angle(Face::front) + M_PI)};
      spec.align.push_back(term);
    }
    for (int h : horizons) {
      MpcConfig mc = base.controller.mpc;
      mc.horizon = h;
      mc.constraint_horizon = 3;
      mc.dt = 0.1;
      MpcProblem problem(states, spec, {}, fp, mc);
      std::vector<double> times;
      times.reserve(static_cast<std::size_t>(solves_per_cell));
      TimingCell cell;
      for (int s = 0; s < solves_per_cell; ++s) {
        const auto t0 = std::chrono::steady_clock::now();
        const SolveResult sr = solve_mpc(problem);
        const auto t1 = std::chrono::steady_clock::now();
        cell.sqp_iterations = sr.stats.iterations;
        cell.qp_iterations = sr.stats.qp_iterations;
        times.push_back(
            std::chrono::duration<double, std::milli>(t1 - t0).count());
      }
      std::sort(times.begin(), times.end());
      cell.robots = n;
      cell.horizon = h;
      cell.constraint_horizon = mc.constraint_horizon;
      cell.median_solve_ms = times[times.size() / 2];
      cell.solves = solves_per_cell;
      cells.push_back(cell);
    }
  }
  return cells;
}

std::string coupling_csv(std::span<const OffsetResult> results) {
  std::string out = "offset_mm,trials,successes,success_rate,mean_time_s\n";
  for (const OffsetResult& r : results) {
    out += format_double(r.offset_mm);
    out += ',' + std::to_string(r.trials);
    out += ',' + std::to_string(r.successes);
    out += ',' + format_double(r.success_rate);
    out += ',' + format_double(r.mean_time_s);
    out += '\n';
  }
  return out;
}

std::string decoupling_csv(const DecoupleResult& result) {
  std::string out = "trials,successes,success_rate,mean_time_s\n";
  out += std::to_string(result.trials);
  out += ',' + std::to_string(result.successes);
  out += ',' + format_double(result.success_rate);
  out += ',' + format_double(result.mean_time_s);
  out += '\n';
  return out;
}

std::string timing_csv(std::span<const TimingCell> cells) {
  std::string out =
      "robots,horizon_m,constraint_horizon,sqp_iterations,qp_iterations,"
      "solves\n";
  for (const TimingCell& c : cells) {
    out += std::to_string(c.robots);
    out += ',' + std::to_string(c.horizon);
    out += ',' + std::to_string(c.constraint_horizon);
    out += ',' + std::to_string(c.sqp_iterations);
    out += ',' + std::to_string(c.qp_iterations);
    out += ',' + std::to_string(c.solves);
    out += '\n';
  }
  return out;
}

}  // namespace flexcouple
