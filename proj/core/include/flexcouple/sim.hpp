#pragma once

// Deterministic planar world. Robots integrate unicycle dynamics under
// zero-order-hold controls; anchor pairs get quasi-static contact
// resolution layered on top:
//
//   approach   head point outside the mouth capture window is rejected from
//              the body rectangle (the lip jam); inside the window the pair
//              becomes `engaged`
//   engaged    the head rides the opening channel. The channel narrows from
//              mouth_halfwidth at the face to slit_halfwidth at the seat;
//              lateral excess wedges the head (projected out, no advance).
//              The last anchor-beam-span of travel is resisted by the
//              forward force curve via resolve_push; a stalled head caps
//              the pair's closure (positions projected apart). Retreating
//              heads slide out freely (tips never seated).
//   seated     the pair rides the floating joint: free axial travel plus
//              elastic pull stretch, lateral seat play, bounded yaw. Joint
//              yaw is ring-buffered; separating motion runs resolve_pull
//              (wiggle release / ejection / blocked), and the relative pose
//              is projected back into the joint envelope each step.
//
// All projections split position corrections evenly between the two robots
// and are bounded by the current step's own motion, so nothing teleports.
// Pair order is fixed, so runs are bit-deterministic.

#include <span>
#include <vector>

#include "flexcouple/anchor.hpp"
#include "flexcouple/coordination.hpp"
#include "flexcouple/dynamics.hpp"
#include "flexcouple/mpc.hpp"
#include "flexcouple/scenario.hpp"

namespace flexcouple {

struct WorldEvent {
  enum class Kind { engaged, inserted, released, ejected, fault };
  double time{0.0};
  int pair{-1};
  Kind kind{Kind::engaged};
};

const char* to_string(WorldEvent::Kind kind);

// Per anchor-pair runtime contact state, parallel to registry.pairs.
struct PairContact {
  AnchorJointState joint;
  std::vector<double> yaw_ring;  // joint yaw trace over yaw_window_s
  std::size_t yaw_next{0};
  bool yaw_full{false};
  bool engaged{false};  // head inside the opening channel (pre/post seat)
  bool wedged{false};   // lateral wedge active this step (diagnostic)
  bool faulted{false};  // joint envelope fault; pair is out of play
  // Entry quality, frozen at capture: |relative yaw| plus lateral miss as
  // a bend angle over the anchor length. Past bend_jam_rad the head binds
  // against the channel before the tip can reach the seat.
  double entry_bend{0.0};

  std::span<const double> yaw_history() const {
    return {yaw_ring.data(), yaw_full ? yaw_ring.size() : yaw_next};
  }
};

struct WorldConfig {
  RobotFootprint footprint;
  ActuationLimits limits;
  AnchorParams anchor;
  double slit_halfwidth{0.002};  // channel width at the seat, m
  double capture_depth{0.002};   // head depth window that can start engagement
  double lateral_play{0.001};    // seated lateral free play before projection
  double contact_slop{0.0002};   // ignored body-overlap depth, m
  double bend_jam_rad{0.2};     // entry bend beyond which the head jams
  double jam_depth_m{0.012};     // max depth a jammed head still reaches, m

  void validate() const;  // throws std::invalid_argument
};

WorldConfig make_world_config(const ScenarioConfig& cfg);

class World {
 public:
  World(WorldConfig config, std::vector<RobotState> robots);

  // Install the pair registry (sizes the contact table). Pair count is
  // fixed from here on; statuses and lists keep mutating.
  void set_registry(PairRegistry registry);

  // Put an anchor pair into the fully coupled state (logically and
  // physically). The robots must already stand at a compatible pose.
  void force_couple(int pair_index);

  // Advance one sim period under the given per-robot controls.
  void step(std::span<const ControlInput> controls, double dt);

  const std::vector<RobotState>& robots() const { return robots_; }
  std::vector<RobotState>& robots() { return robots_; }
  PairRegistry& registry() { return registry_; }
  const PairRegistry& registry() const { return registry_; }
  const std::vector<PairContact>& contacts() const { return contacts_; }
  const std::vector<WorldEvent>& events() const { return events_; }
  const WorldConfig& config() const { return config_; }
  double time() const { return time_; }

 private:
  WorldConfig config_;
  std::vector<RobotState> robots_;
  PairRegistry registry_;
  std::vector<PairContact> contacts_;
  std::vector<WorldEvent> events_;
  double time_{0.0};

  void push_yaw(PairContact& c, double yaw, double dt);
  void resolve_anchor_pair(int pair_index, double dt);
  void resolve_body_overlaps();
  void unlink_pair(int pair_index, WorldEvent::Kind kind);
};

// ---- scenario runner ------------------------------------------------------

// One control period of the log: post-step states, the held controls, pair
// statuses, and the solver stats of the planning step that produced them
// (zeroed for open-loop phases).
struct StepRecord {
  double t{0.0};
  int phase{-1};
  std::vector<RobotState> states;
  std::vector<ControlInput> controls;
  std::vector<PairStatus> statuses;
  SolveStats solver;
};

struct RunResult {
  std::vector<StepRecord> log;  // includes a t=0 record of the initial state
  std::vector<WorldEvent> events;
  bool failsafe_abort{false};   // planner exhausted its fail-safe budget
  double end_time{0.0};
  std::vector<PairStatus> final_statuses;
  bool all_connected{false};
  double connect_time{-1.0};    // first time every pair was connected, or -1
  double decouple_time{-1.0};   // first time no pair stayed connected, or -1
  double max_pip_violation{0.0};  // worst maintained-pair violation accepted
};

// Run the schedule to completion (or early stop). Planning runs at
// control_dt with zero-order-hold controls over sim_dt sub-steps; wiggle
// phases bypass the planner and track the shake at sim rate.
RunResult run_scenario(const ScenarioConfig& cfg);

}  // namespace flexcouple
