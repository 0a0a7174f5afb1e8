#pragma once

// Unicycle dynamics with acceleration inputs. State x = [px, py, theta, v, w],
// control u = [vdot, wdot]:
//   px'    = v cos(theta)
//   py'    = v sin(theta)
//   theta' = w
//   v'     = vdot
//   w'     = wdot
// The controller transcribes the explicit-Euler discretization of this
// model; RK4 exists as an accuracy oracle for tests, not as a product path.

#include <array>

#include "flexcouple/geometry.hpp"

namespace flexcouple {

struct RobotState {
  double px{0.0};
  double py{0.0};
  double theta{0.0};  // rad, (-pi, pi]
  double v{0.0};      // m/s, forward
  double w{0.0};      // rad/s

  Pose2 pose() const { return {{px, py}, theta}; }
};

struct ControlInput {
  double vdot{0.0};  // m/s^2
  double wdot{0.0};  // rad/s^2
};

std::array<double, 5> state_derivative(const RobotState& x,
                                       const ControlInput& u);

// One explicit-Euler step; heading re-wrapped to (-pi, pi].
RobotState euler_step(const RobotState& x, const ControlInput& u, double dt);

// Classic RK4 step of the same vector field (test oracle).
RobotState rk4_step(const RobotState& x, const ControlInput& u, double dt);

// Box bounds on control and velocity, plus the butterfly-shaped coupling
// between linear and angular speed: |v| >= butterfly_ratio * |w|, i.e. the
// platform cannot spin without translating. butterfly_printed_form swaps in
// the alternative published inequality v <= |(w_max/v_max) w| for
// comparison runs; it is not the default.
struct ActuationLimits {
  double vdot_max{7.35};   // m/s^2  (max drive force / platform mass)
  double wdot_max{50.0};   // rad/s^2
  double v_max{0.05};      // m/s
  double w_max{2.0};       // rad/s
  double butterfly_ratio{0.00625};  // (m/s)/(rad/s): 0.25 * v_max / w_max
  bool butterfly_printed_form{false};

  void validate() const;  // throws std::invalid_argument
};

bool control_feasible(const ControlInput& u, const ActuationLimits& lim);
// Velocity-box AND butterfly membership of (v, w).
bool state_feasible(const RobotState& x, const ActuationLimits& lim);

ControlInput clamp_control(const ControlInput& u, const ActuationLimits& lim);

// Open-loop decoupling shake: v = v_bias (steady pull on the anchor),
// w = w_amplitude * sin(angular_frequency * t).
struct WiggleParams {
  double v_bias{0.02};             // m/s
  double w_amplitude{1.2};         // rad/s
  double angular_frequency{6.283185307179586};  // rad/s (1 Hz)

  void validate() const;
};

struct VelocityCommand {
  double v{0.0};
  double w{0.0};
};

VelocityCommand wiggle_command(double t, const WiggleParams& params);

// Acceleration that reaches `cmd` in one Euler step from the current
// velocities, clamped to the control box (the sim's velocity-tracking law).
ControlInput track_velocity(const RobotState& x, const VelocityCommand& cmd,
                            double dt, const ActuationLimits& lim);

}  // namespace flexcouple
