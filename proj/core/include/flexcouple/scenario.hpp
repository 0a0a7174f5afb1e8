#pragma once

// Scenario configuration: everything a run needs, loadable from JSON.
//
// The JSON schema is strict: unknown fields are rejected (with the full
// field path in the error), and every numeric field name carries its unit
// suffix (_m, _rad, _s, _mps, _n, ...). Force-profile knots are given in
// millimeters/newtons and converted to SI on load. Every field has a
// default, so `{}` plus a robots array is a valid scenario.
//
// serialize_scenario() emits the complete effective config with sorted
// keys; its FNV-1a hash identifies a run's configuration in summaries and
// manifests.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "flexcouple/anchor.hpp"
#include "flexcouple/coordination.hpp"
#include "flexcouple/dynamics.hpp"
#include "flexcouple/mpc.hpp"

namespace flexcouple {

inline constexpr std::uint64_t kDefaultSeed = 0x0f1e2d3c4b5a6978ULL;

enum class PhaseKind { align, goto_goal, velocity, wiggle };

const char* to_string(PhaseKind kind);

struct PhaseSpec {
  PhaseKind kind{PhaseKind::align};
  double duration_s{60.0};
  bool stop_when_connected{false};  // align: end early once all pairs couple
  bool stop_when_decoupled{false};  // wiggle: end early once none remain
  std::vector<Point2> goals;              // goto_goal: one per robot
  std::vector<VelocityCommand> commands;  // velocity: one per robot
  std::vector<int> wiggle_robots;         // wiggle: robots running the shake
};

// Contact-resolution knobs that belong to the world, not to any one module.
struct ContactConfig {
  double slit_halfwidth_m{0.002};  // channel width at the seat
  double capture_depth_m{0.002};   // head depth window that starts engagement
  double lateral_play_m{0.001};    // seated lateral free play before projection
  double contact_slop_m{0.0002};   // ignored body-overlap depth
  double bend_jam_rad{0.2};       // entry bend beyond which the head jams
  double jam_depth_m{0.012};       // max depth a jammed head still reaches

  void validate() const;  // throws std::invalid_argument
};

struct ScenarioConfig {
  std::uint64_t seed{kDefaultSeed};
  double sim_dt_s{0.01};
  double control_dt_s{0.1};
  std::vector<Pose2> robots;  // initial poses, at rest
  RobotFootprint footprint{};
  ActuationLimits limits{};
  AnchorParams anchor{};
  WiggleParams wiggle{};
  ControllerConfig controller{};
  ContactConfig contact{};
  TargetConfig target{};          // empty slots = no coupling goal
  std::vector<int> preconnected;  // pair indices (assignment order) that
                                  // start coupled
  std::vector<PhaseSpec> schedule;

  void validate() const;  // throws std::invalid_argument
};

// Two robots on the x axis, anchor head touching the mouth plane (the
// standard coupling start), one align phase that stops on connection.
ScenarioConfig default_scenario();

// Same geometry with the pair already coupled and one wiggle phase on the
// anchor owner (the standard decoupling start).
ScenarioConfig default_decouple_scenario();

// Thrown on malformed scenario JSON; what() names the offending field path.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::string& path);

// Complete effective config, sorted keys, canonical float formatting.
std::string serialize_scenario(const ScenarioConfig& cfg);

// FNV-1a 64-bit over the canonical serialization.
std::uint64_t config_hash(const ScenarioConfig& cfg);
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace flexcouple
