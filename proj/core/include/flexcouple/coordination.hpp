#pragma once

// Connection-pair lifecycle: turning a target configuration into goal pairs,
// classifying them (anchor vs knob), tracking coupling status from live
// geometry, scheduling non-conflicting active pairs, and the top-level
// alignment loop that feeds the receding-horizon controller.
//
// Status machine per pair:
//   decoupled -> head_aligned -> head_inserted
// with the single allowed regression head_aligned -> decoupled (the head
// slipped back out of the opening before seating). A pair that reports
// head_inserted migrates from the active list to the connected list on the
// *next* update call, mirroring the check-then-migrate order of the
// published procedure.

#include <span>
#include <vector>

#include "flexcouple/dynamics.hpp"
#include "flexcouple/geometry.hpp"
#include "flexcouple/mpc.hpp"

namespace flexcouple {

enum class PairStatus { decoupled, head_aligned, head_inserted };
enum class PairType { anchor, knob };

// How the anchor head approaches the opening while the pair is decoupled.
// Heads that start inside the mouth's lateral span press straight in
// (direct); heads that start outside it hold a standoff clear of the face
// and arc sideways until centered (arc). Frozen when the pair first turns
// active so the approach cannot re-plan itself mid-entry.
enum class EntryMode { unset, direct, arc };

// Outward normal direction of a face in the body frame.
double face_normal_angle(Face face);

// A required coupling between two robots, by face.
struct GoalPair {
  int robot_a{0};
  Face face_a{Face::back};
  int robot_b{0};
  Face face_b{Face::front};
};

// Goal pair augmented with lifecycle bookkeeping. Offsets and the anchor
// head position derive from the (uniform) footprint at use time rather than
// being stored, so the footprint stays the single source of truth.
struct ConnectionPair {
  int robot_a{0};
  Face face_a{Face::back};
  int robot_b{0};
  Face face_b{Face::front};
  PairStatus status{PairStatus::decoupled};
  PairType type{PairType::anchor};
  bool anchor_on_a{true};  // anchor pairs: which endpoint carries the anchor
  EntryMode entry_mode{EntryMode::unset};

  int owner_robot() const { return anchor_on_a ? robot_a : robot_b; }
  Face owner_face() const { return anchor_on_a ? face_a : face_b; }
  int opening_robot() const { return anchor_on_a ? robot_b : robot_a; }
  Face opening_face() const { return anchor_on_a ? face_b : face_a; }

  // Anchor head rest point in the owner body frame: the owner connection
  // point pushed one anchor length toward the back.
  Point2 head_offset(const RobotFootprint& fp) const {
    const Point2 base = fp.connection_offset(owner_face());
    return {base.x - fp.anchor_length, base.y};
  }
};

// Desired formation: slot poses (one robot per slot, frame arbitrary) plus
// the couplings required between slots.
struct TargetConfig {
  struct SlotPair {
    int slot_a{0};
    Face face_a{Face::back};
    int slot_b{0};
    Face face_b{Face::front};
  };

  std::vector<Pose2> slots;
  std::vector<SlotPair> pairs;

  void validate() const;  // throws std::invalid_argument
};

// Greedy nearest-first matching of robots to target slots after centering
// the slot cloud on the robot cloud (the formation floats; only who-pairs-
// with-whom matters). Returns robot index per slot. Deterministic: ties
// break on (slot, robot) index. Throws if there are more slots than robots.
std::vector<int> match_slots(const TargetConfig& target,
                             std::span<const RobotState> states);

// Goal pair list between matched neighbors per the target's slot pairs.
std::vector<GoalPair> assign_connection_pairs(
    const TargetConfig& target, std::span<const RobotState> states);

// Classify each goal pair and initialize its lifecycle state: front/back
// endpoints make an anchor pair (the back face owns the anchor), side
// endpoints a knob pair (exactly one protruding knob per hole). Anything
// else is rejected with std::invalid_argument.
std::vector<ConnectionPair> augment_pairs(std::span<const GoalPair> goal,
                                          const RobotFootprint& fp);

// Pair lists by index into `pairs`. `active` holds the couplings currently
// pursued (robot-disjoint), `connected` the completed ones.
struct PairRegistry {
  std::vector<ConnectionPair> pairs;
  std::vector<int> active;
  std::vector<int> connected;
  double epsilon{0.003};  // status-test membership margin, m

  bool all_connected() const {
    return !pairs.empty() && connected.size() == pairs.size();
  }
  // Index-range, disjointness, one-active-pair-per-robot, and
  // connected-status invariants; throws std::logic_error on violation.
  void validate() const;
};

// Force a pair into the connected state (pre-coupled scenario starts).
void mark_connected(PairRegistry& reg, int pair_index);

// Status update from live geometry, over the active list only:
//   decoupled    -> head_aligned  when the anchor head is inside the mated
//                                 robot's opening triangle by epsilon
//   head_aligned -> head_inserted when the owner connection point is inside
//                                 the mated robot's footprint by epsilon
//   head_aligned -> decoupled     when the head left the opening triangle
//   head_inserted pairs migrate active -> connected
// Knob pairs skip the intermediate state: they connect when their two
// points coincide within epsilon (inf-norm), matching the maintenance rows.
void update_pairs(PairRegistry& reg, std::span<const RobotState> states,
                  const RobotFootprint& fp);

// Rebuild the active list: a maximal robot-disjoint subset of the not-yet-
// connected pairs, preferring smaller current head-to-seat distance, ties
// by pair index. Robots in connected pairs stay eligible (chains grow).
// Also freezes each newly active anchor pair's entry mode from the head's
// current lateral miss against the mouth span.
void assign_active_pairs(PairRegistry& reg,
                         std::span<const RobotState> states,
                         const RobotFootprint& fp);

// MPC inputs from the registry. The mated endpoint's connector frame is
// rotated by pi so that a zero heading error means the faces oppose.
// Anchor pairs still in the decoupled stage align the anchor head onto an
// aim point near the opening instead of face-to-face: direct entries aim
// just inside the face so the head presses into the funnel, arc entries
// hold the aim at a standoff outside it until the head is laterally
// centered (or has physically entered), then press. Once head_aligned
// flips, the terms switch to the face connectors to seat the tip. Knob
// pairs are face-to-face throughout.
std::vector<AlignTerm> align_terms(const PairRegistry& reg,
                                   std::span<const RobotState> states,
                                   const RobotFootprint& fp);
std::vector<MaintainedPair> maintained_pairs(const PairRegistry& reg,
                                             const RobotFootprint& fp);

// Top-level alignment loop. One step = (assign goal pairs once), rebuild
// the active set, solve the MPC with alignment costs over active pairs and
// maintenance constraints over connected pairs, then update statuses from
// the new geometry. Control comes out before the status update, matching
// the published loop order.
class AlignmentCoordinator {
 public:
  AlignmentCoordinator(TargetConfig target, const ControllerConfig& config,
                       const RobotFootprint& fp, int num_robots);

  std::vector<ControlInput> step(std::span<const RobotState> states);

  // Run goal assignment + augmentation now if it has not happened yet
  // (scenario setup uses this to pre-mark pairs as connected).
  void ensure_assigned(std::span<const RobotState> states);

  const PairRegistry& registry() const { return registry_; }
  PairRegistry& registry() { return registry_; }
  RecedingHorizonController& controller() { return controller_; }
  const RecedingHorizonController& controller() const { return controller_; }
  bool assigned() const { return assigned_; }

 private:
  TargetConfig target_;
  RobotFootprint footprint_;
  RecedingHorizonController controller_;
  PairRegistry registry_;
  int num_robots_;
  bool assigned_{false};
};

}  // namespace flexcouple
