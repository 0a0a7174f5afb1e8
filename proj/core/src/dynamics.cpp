#include "flexcouple/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flexcouple {

std::array<double, 5> state_derivative(const RobotState& x,
                                       const ControlInput& u) {
  return {x.v * std::cos(x.theta), x.v * std::sin(x.theta), x.w, u.vdot,
          u.wdot};
}

RobotState euler_step(const RobotState& x, const ControlInput& u, double dt) {
  const auto d = state_derivative(x, u);
  RobotState n;
  n.px = x.px + dt * d[0];
  n.py = x.py + dt * d[1];
  n.theta = wrap_angle(x.theta + dt * d[2]);
  n.v = x.v + dt * d[3];
  n.w = x.w + dt * d[4];
  return n;
}

RobotState rk4_step(const RobotState& x, const ControlInput& u, double dt) {
  const auto add = [](const RobotState& s, const std::array<double, 5>& d,
                      double h) {
    RobotState r;
    r.px = s.px + h * d[0];
    r.py = s.py + h * d[1];
    r.theta = s.theta + h * d[2];  // wrap only at the end
    r.v = s.v + h * d[3];
    r.w = s.w + h * d[4];
    return r;
  };
  const auto k1 = state_derivative(x, u);
  const auto k2 = state_derivative(add(x, k1, 0.5 * dt), u);
  const auto k3 = state_derivative(add(x, k2, 0.5 * dt), u);
  const auto k4 = state_derivative(add(x, k3, dt), u);
  RobotState n;
  n.px = x.px + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
  n.py = x.py + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
  n.theta =
      wrap_angle(x.theta + dt / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]));
  n.v = x.v + dt / 6.0 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3]);
  n.w = x.w + dt / 6.0 * (k1[4] + 2 * k2[4] + 2 * k3[4] + k4[4]);
  return n;
}

void ActuationLimits::validate() const {
  if (vdot_max <= 0 || wdot_max <= 0 || v_max <= 0 || w_max <= 0)
    throw std::invalid_argument("actuation bounds must be positive");
  if (butterfly_ratio < 0)
    throw std::invalid_argument("butterfly_ratio must be >= 0");
  if (butterfly_ratio * w_max > v_max)
    throw std::invalid_argument(
        "butterfly_ratio * w_max exceeds v_max: the velocity set would "
        "exclude every state with |w| = w_max");
}

bool control_feasible(const ControlInput& u, const ActuationLimits& lim) {
  return std::abs(u.vdot) <= lim.vdot_max && std::abs(u.wdot) <= lim.wdot_max;
}

bool state_feasible(const RobotState& x, const ActuationLimits& lim) {
  if (std::abs(x.v) > lim.v_max || std::abs(x.w) > lim.w_max) return false;
  if (lim.butterfly_printed_form)
    return x.v <= std::abs((lim.w_max / lim.v_max) * x.w);
  return std::abs(x.v) >= lim.butterfly_ratio * std::abs(x.w);
}

ControlInput clamp_control(const ControlInput& u, const ActuationLimits& lim) {
  return {std::clamp(u.vdot, -lim.vdot_max, lim.vdot_max),
          std::clamp(u.wdot, -lim.wdot_max, lim.wdot_max)};
}

void WiggleParams::validate() const {
  if (v_bias <= 0 || w_amplitude <= 0 || angular_frequency <= 0)
    throw std::invalid_argument("wiggle parameters must be positive");
}

VelocityCommand wiggle_command(double t, const WiggleParams& params) {
  return {params.v_bias,
          params.w_amplitude * std::sin(params.angular_frequency * t)};
}

ControlInput track_velocity(const RobotState& x, const VelocityCommand& cmd,
                            double dt, const ActuationLimits& lim) {
  return clamp_control({(cmd.v - x.v) / dt, (cmd.w - x.w) / dt}, lim);
}

}  // namespace flexcouple
