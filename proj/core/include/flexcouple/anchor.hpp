#pragma once

// Quasi-static model of the sprung-beam anchor and its floating holder.
//
// Coupling sequence: the anchor head slides into the mated robot's front
// opening, deflecting its beams against the *forward* resistance curve;
// at full engagement the beam tips snap outward behind the seat
// (tip_seated). From then on the pair rides a floating prismatic+revolute
// joint (free axial travel plus bounded yaw). Pulling a seated anchor loads
// the much stiffer *backward* curve — the asymmetry that makes the
// connection strong in tension but cheap to make. Shaking the joint in yaw
// (wiggle) folds the tips back in; a released anchor slides out against the
// forward curve only.
//
// All displacements meters, forces newtons. Resolution is quasi-static: a
// force level either clears the remaining barrier or stalls at the first
// point whose resistance exceeds it; no dynamics inside the joint.

#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "flexcouple/geometry.hpp"

namespace flexcouple {

// Piecewise-linear force-vs-displacement curves, flat beyond the last knot.
// Knots must start at 0, be strictly increasing in displacement, and both
// curves must end at the same displacement (the engagement span).
struct ForceProfile {
  using Knot = std::pair<double, double>;  // displacement m, force N
  std::vector<Knot> forward;               // head sliding in / released slide-out
  std::vector<Knot> backward;              // seated anchor loaded in tension
  double pullout_displacement{0.003};      // tension travel that frees the head
  double slip_displacement{0.0047};        // backward plateau end (post-peak drop)
  double hold_load_kg{0.5};                // rated static hold, reporting only

  double engagement_span() const { return forward.back().first; }
  double forward_force(double d) const;
  double backward_force(double d) const;
  void validate() const;  // throws std::invalid_argument
};

// Measured-shape default: forward peak 0.20 N at 2 mm (below the 0.5 N the
// drive can push), backward plateau 0.60 N through 4.7 mm (above anything
// the drive can pull), pullout at 3 mm.
ForceProfile default_force_profile();

struct AnchorJointState {
  // Pre-seat: how far the head has entered the opening channel
  // [0, engagement_span]. Post-seat: the floating holder's axial slide
  // position [0, joint_travel], mid-range nominal, 0 = fully extended.
  double insertion{0.0};
  double yaw{0.0};          // rad, relative heading across the joint
  bool tip_seated{false};
  // Elastic stretch past full extension while tension loads the beam tips
  // [0, pullout_displacement]. Relaxes when the load does.
  double pull_stretch{0.0};
};

struct AnchorParams {
  ForceProfile profile{default_force_profile()};
  double joint_travel{0.005};          // free axial travel once seated, m
  double yaw_limit{0.5};               // rad, beyond = joint fault
  double yaw_release_threshold{0.25};  // rad of yaw sweep that frees the tips
  double yaw_window_s{1.0};            // sweep measured over this window
  double push_force_max{0.5};          // N, drive force at full closure speed
  double force_speed_ref{0.005};       // m/s mapping closure speed -> force

  void validate() const;
};

enum class CouplingEvent {
  none,      // motion within the envelope, nothing structural
  inserted,  // head reached full engagement; tips snapped out
  ejected,   // head cleared the pullout travel; pair is free
  blocked    // resistance exceeds the applied force; stalled
};

struct CouplingOutcome {
  CouplingEvent event{CouplingEvent::none};
  double displacement{0.0};  // where the motion ended on its curve
  double resistance{0.0};    // barrier force at that point
};

// Push the head deeper against the forward curve. `max_advance` caps how
// far this call may travel (the simulator passes the geometric closure of
// the current step; the default is the pure quasi-static resolution).
// Seated joints are not pushable (returns the input unchanged).
std::pair<AnchorJointState, CouplingOutcome> resolve_push(
    const AnchorJointState& joint, double axial_force,
    const AnchorParams& params,
    double max_advance = std::numeric_limits<double>::infinity());

// Pull the joint apart. yaw_history is the recent yaw trace; a seated joint
// whose peak-to-peak sweep reaches yaw_release_threshold releases its tips
// (tip_seated -> false, persistent); that releasing call still drags the
// tips out through the forward curve. Ejection requires the force to clear
// the barrier over the whole pullout travel; otherwise the stretch stalls
// (blocked). A joint whose tips were already unseated on entry holds
// nothing: any positive tension ejects it immediately.
std::pair<AnchorJointState, CouplingOutcome> resolve_pull(
    const AnchorJointState& joint, double axial_force,
    std::span<const double> yaw_history, const AnchorParams& params,
    double max_retreat = std::numeric_limits<double>::infinity());

// Map the relative pose of a connected pair onto the joint envelope.
// Returns the clamped joint state and whether the raw pose violated the
// envelope (separation beyond free travel plus pullout stretch,
// |yaw| > yaw_limit, or lateral seat offset beyond seat_recess).
// Over-compression is clamped but not flagged: the simulator resolves it
// as body contact, not as a joint fault.
std::pair<AnchorJointState, bool> clamp_joint(const Pose2& owner_pose,
                                              const Pose2& other_pose,
                                              const RobotFootprint& fp,
                                              const AnchorParams& params);

// Drive force available along the coupling axis at a given closure (or
// separation) speed: push_force_max * min(1, speed / force_speed_ref),
// zero for speeds <= 0.
double axial_drive_force(double speed, const AnchorParams& params);

}  // namespace flexcouple
