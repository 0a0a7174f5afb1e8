#include "flexcouple/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <stdexcept>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "flexcouple/experiments.hpp"
#include "flexcouple/raycast_oracle.hpp"
#include "flexcouple/runlog.hpp"

namespace flexcouple {
namespace {

using nlohmann::json;

struct Args {
  std::string config;
  std::string out{"out"};
  std::uint64_t seed{kDefaultSeed};
  bool seed_set{false};
  int workers{1};
  int trials{0};  // 0 -> per-command default
  double timeout_s{0.0};
  std::vector<double> offsets_mm;
  std::vector<int> robots;
  std::vector<int> horizons;
  bool inject_sign_flip{false};
};

// Artifact bookkeeping for one command invocation. The manifest is written
// last, lists every artifact including itself, and is attempted even on the
// config-error path (skipped silently if the out dir is unusable).
struct RunIo {
  std::string command;
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed{0};
  std::uint64_t hash{0};
  std::vector<std::string> artifacts;
};

void emit(RunIo& io, const std::string& name, const std::string& text) {
  write_text_file(
      (std::filesystem::path(io.out_dir) / name).string(), text);
  io.artifacts.push_back(name);
}

void write_manifest(RunIo& io) {
  Manifest m;
  m.command = io.command;
  m.config_path = io.config_path;
  m.seed = io.seed;
  m.out_dir = io.out_dir;
  m.artifacts = io.artifacts;
  m.artifacts.push_back("manifest.json");
  m.config_hash = io.hash;
  write_text_file(
      (std::filesystem::path(io.out_dir) / "manifest.json").string(),
      manifest_json(m));
}

int config_error(RunIo& io, const std::string& what) {
  std::cerr << io.command << ": " << what << '\n';
  try {
    write_manifest(io);
  } catch (const std::exception&) {
    // out dir unusable: the diagnostic above is all we can leave behind
  }
  return 2;
}

RunIo make_io(const char* command, const Args& a) {
  RunIo io;
  io.command = command;
  io.config_path = a.config.empty() ? "<default>" : a.config;
  io.out_dir = a.out;
  io.seed = a.seed;
  return io;
}

// Base scenario for a command: the config file if given, the built-in
// two-robot coupling scenario otherwise; --seed wins over the file's seed.
ScenarioConfig load_base(const Args& a) {
  ScenarioConfig cfg =
      a.config.empty() ? default_scenario() : load_scenario(a.config);
  if (a.seed_set) cfg.seed = a.seed;
  return cfg;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

json trial_json(const TrialResult& t) {
  json j;
  j["success"] = t.success;
  j["completion_time_s"] = t.completion_time;
  j["faulted"] = t.faulted;
  return j;
}

int cmd_simulate(const Args& a) {
  RunIo io = make_io("simulate", a);
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioConfig cfg;
  try {
    cfg = load_base(a);
  } catch (const std::exception& e) {
    return config_error(io, e.what());
  }
  io.seed = cfg.seed;
  io.hash = config_hash(cfg);

  const RunResult rr = run_scenario(cfg);
  emit(io, "trajectory.csv", trajectory_csv(rr));
  SummaryInfo si;
  si.command = io.command;
  si.seed = cfg.seed;
  si.config_hash = io.hash;
  si.wall_time_s = seconds_since(t0);
  emit(io, "summary.json", run_summary_json(rr, si));
  write_manifest(io);
  if (rr.failsafe_abort) {
    std::cerr << "simulate: planner fail-safe terminated the run at t="
              << format_double(rr.end_time) << " s\n";
    return 3;
  }
  return 0;
}

int cmd_couple_bench(Args a) {
  if (a.trials == 0) a.trials = 100;
  if (a.timeout_s == 0.0) a.timeout_s = 60.0;
  if (a.offsets_mm.empty()) {
    for (int mm = 0; mm <= 30; mm += 2)
      a.offsets_mm.push_back(static_cast<double>(mm));
  }
  RunIo io = make_io("couple-bench", a);
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioConfig cfg;
  try {
    cfg = load_base(a);
    if (a.trials < 1) throw ConfigError("--trials must be >= 1");
    if (a.timeout_s <= 0.0) throw ConfigError("--timeout-s must be > 0");
    if (a.workers < 1) throw ConfigError("--workers must be >= 1");
    for (double mm : a.offsets_mm)
      if (mm < 0.0) throw ConfigError("--offsets entries must be >= 0");
  } catch (const std::exception& e) {
    return config_error(io, e.what());
  }
  io.seed = cfg.seed;
  io.hash = config_hash(cfg);

  const std::vector<OffsetResult> results = run_coupling_experiment(
      cfg, a.offsets_mm, a.trials, a.timeout_s, cfg.seed, a.workers);
  emit(io, "coupling.csv", coupling_csv(results));

  json s;
  s["command"] = io.command;
  s["seed"] = cfg.seed;
  s["config_hash"] = hash_hex(io.hash);
  s["trials_per_offset"] = a.trials;
  s["timeout_s"] = a.timeout_s;
  s["workers"] = a.workers;
  json rows = json::array();
  for (const OffsetResult& r : results) {
    json row;
    row["offset_mm"] = r.offset_mm;
    row["trials"] = r.trials;
    row["successes"] = r.successes;
    row["success_rate"] = r.success_rate;
    row["mean_time_s"] = r.mean_time_s;
    json trials = json::array();
    for (const TrialResult& t : r.results) trials.push_back(trial_json(t));
    row["trial_results"] = trials;
    rows.push_back(row);
  }
  s["offsets"] = rows;
  s["wall_time_s"] = seconds_since(t0);
  emit(io, "summary.json", s.dump(2) + "\n");
  write_manifest(io);
  return 0;
}

int cmd_decouple_bench(Args a) {
  if (a.trials == 0) a.trials = 100;
  if (a.timeout_s == 0.0) a.timeout_s = 30.0;
  RunIo io = make_io("decouple-bench", a);
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioConfig cfg;
  try {
    cfg = load_base(a);
    if (a.trials < 1) throw ConfigError("--trials must be >= 1");
    if (a.timeout_s <= 0.0) throw ConfigError("--timeout-s must be > 0");
    if (a.workers < 1) throw ConfigError("--workers must be >= 1");
  } catch (const std::exception& e) {
    return config_error(io, e.what());
  }
  io.seed = cfg.seed;
  io.hash = config_hash(cfg);

  const DecoupleResult result = run_decoupling_experiment(
      cfg, a.trials, a.timeout_s, cfg.seed, a.workers);
  emit(io, "decoupling.csv", decoupling_csv(result));

  json s;
  s["command"] = io.command;
  s["seed"] = cfg.seed;
  s["config_hash"] = hash_hex(io.hash);
  s["trials"] = result.trials;
  s["successes"] = result.successes;
  s["success_rate"] = result.success_rate;
  s["mean_time_s"] = result.mean_time_s;
  s["timeout_s"] = a.timeout_s;
  s["workers"] = a.workers;
  json trials = json::array();
  for (const TrialResult& t : result.results) trials.push_back(trial_json(t));
  s["trial_results"] = trials;
  s["wall_time_s"] = seconds_since(t0);
  emit(io, "summary.json", s.dump(2) + "\n");
  write_manifest(io);
  return 0;
}

int cmd_timing_bench(Args a) {
  if (a.trials == 0) a.trials = 5;  // solves per cell
  if (a.robots.empty()) a.robots = {2, 4, 6, 8};
  if (a.horizons.empty()) a.horizons = {3, 5, 10};
  RunIo io = make_io("timing-bench", a);
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioConfig cfg;
  try {
    cfg = load_base(a);
    if (a.trials < 1) throw ConfigError("--trials must be >= 1");
    for (int n : a.robots)
      if (n < 2) throw ConfigError("--robots entries must be >= 2");
    for (int h : a.horizons)
      if (h < 1) throw ConfigError("--horizons entries must be >= 1");
  } catch (const std::exception& e) {
    return config_error(io, e.what());
  }
  io.seed = cfg.seed;
  io.hash = config_hash(cfg);

  const std::vector<TimingCell> cells =
      run_timing_benchmark(cfg, a.robots, a.horizons, a.trials);
  emit(io, "timing.csv", timing_csv(cells));

  json s;
  s["command"] = io.command;
  s["seed"] = cfg.seed;
  s["config_hash"] = hash_hex(io.hash);
  s["solves_per_cell"] = a.trials;
  json rows = json::array();
  for (const TimingCell& c : cells) {
    json row;
    row["robots"] = c.robots;
    row["horizon_m"] = c.horizon;
    row["constraint_horizon"] = c.constraint_horizon;
    row["median_solve_ms"] = c.median_solve_ms;
    row["sqp_iterations"] = c.sqp_iterations;
    row["qp_iterations"] = c.qp_iterations;
    rows.push_back(row);
  }
  s["cells"] = rows;
  s["wall_time_s"] = seconds_since(t0);
  emit(io, "summary.json", s.dump(2) + "\n");
  write_manifest(io);
  return 0;
}

void print_counterexample(int index, const PipCase& pc,
                          const std::vector<double>& residuals,
                          bool predicate_inside, bool oracle_inside) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::cerr << "pip-check: disagreement on case " << index << '\n';
  std::cerr << "  polygon:";
  for (const Point2& v : pc.polygon)
    std::cerr << " (" << num(v.x) << ", " << num(v.y) << ")";
  std::cerr << '\n';
  std::cerr << "  point: (" << num(pc.point.x) << ", " << num(pc.point.y)
            << ")\n";
  std::cerr << "  residuals:";
  for (double r : residuals) std::cerr << ' ' << num(r);
  std::cerr << '\n';
  std::cerr << "  residual predicate says "
            << (predicate_inside ? "inside" : "outside")
            << ", ray-cast oracle says "
            << (oracle_inside ? "inside" : "outside") << '\n';
}

int cmd_pip_check(Args a) {
  if (a.trials == 0) a.trials = 10000;
  RunIo io = make_io("pip-check", a);
  io.config_path = "<none>";
  ScenarioConfig dummy;
  if (a.trials < 1) return config_error(io, "--trials must be >= 1");
  // No scenario config: hash the parameters that define the fuzz run.
  io.hash = fnv1a64("pip-check:" + std::to_string(a.seed) + ":" +
                    std::to_string(a.trials) +
                    (a.inject_sign_flip ? ":inject" : ""));

  UniformRng rng(a.seed);
  int disagreements = 0;
  constexpr int kMaxDumps = 5;
  for (int i = 0; i < a.trials; ++i) {
    const PipCase pc = random_pip_case(rng);
    const ConvexPolygon poly(pc.polygon);
    const std::vector<double> residuals = pip_residuals(pc.point, poly);
    bool inside = true;
    for (double r : residuals)
      if (r > 0.0) inside = false;
    // Negative control: emulate a sign-flip bug in the predicate so the
    // oracle comparison must catch it.
    if (a.inject_sign_flip) inside = !inside;
    const bool oracle = raycast_point_in_polygon(pc.point, pc.polygon);
    if (inside != oracle) {
      if (disagreements < kMaxDumps)
        print_counterexample(i, pc, residuals, inside, oracle);
      ++disagreements;
    }
  }
  std::cout << "pip-check: " << a.trials << " cases, " << disagreements
            << " disagreements\n";
  try {
    write_manifest(io);
  } catch (const std::exception& e) {
    return config_error(io, e.what());
  }
  return disagreements == 0 ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"flexible-coupling robot swarm: simulator and experiments"};
  app.require_subcommand(1);
  Args a;

  auto add_common = [&a](CLI::App* sub, bool with_config = true) {
    if (with_config)
      sub->add_option("--config", a.config, "scenario config (JSON)");
    sub->add_option("--seed", a.seed, "seed override")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--out", a.out, "output directory (default: out)");
  };

  CLI::App* sim = app.add_subcommand("simulate", "run one scenario");
  add_common(sim);

  CLI::App* couple =
      app.add_subcommand("couple-bench", "coupling success-rate sweep");
  add_common(couple);
  couple->add_option("--workers", a.workers, "parallel trial workers");
  couple->add_option("--offsets", a.offsets_mm, "lateral offsets in mm")
      ->delimiter(',');
  couple->add_option("--trials", a.trials, "trials per offset");
  couple->add_option("--timeout-s", a.timeout_s, "per-trial time limit");

  CLI::App* decouple =
      app.add_subcommand("decouple-bench", "wiggle decoupling statistics");
  add_common(decouple);
  decouple->add_option("--workers", a.workers, "parallel trial workers");
  decouple->add_option("--trials", a.trials, "number of trials");
  decouple->add_option("--timeout-s", a.timeout_s, "per-trial time limit");

  CLI::App* timing =
      app.add_subcommand("timing-bench", "solver timing scaling grid");
  add_common(timing);
  timing->add_option("--robots", a.robots, "robot counts")->delimiter(',');
  timing->add_option("--horizons", a.horizons, "planning horizons")
      ->delimiter(',');
  timing->add_option("--trials", a.trials, "solves per grid cell");

  CLI::App* pip =
      app.add_subcommand("pip-check", "polygon-membership oracle cross-check");
  add_common(pip, /*with_config=*/false);
  pip->add_option("--trials", a.trials, "number of random cases");
  pip->add_flag("--inject-sign-flip", a.inject_sign_flip,
                "negative control: corrupt the predicate")
      ->group("");  // hidden

  const CLI::Option* seed_opts[] = {
      sim->get_option("--seed"), couple->get_option("--seed"),
      decouple->get_option("--seed"), timing->get_option("--seed"),
      pip->get_option("--seed")};

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  for (const CLI::Option* o : seed_opts) a.seed_set |= o->count() > 0;

  try {
    if (sim->parsed()) return cmd_simulate(a);
    if (couple->parsed()) return cmd_couple_bench(a);
    if (decouple->parsed()) return cmd_decouple_bench(a);
    if (timing->parsed()) return cmd_timing_bench(a);
    if (pip->parsed()) return cmd_pip_check(a);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;  // unreachable: require_subcommand(1)
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("flexcouple");
  for (const std::string& s : args) argv.push_back(s.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace flexcouple
