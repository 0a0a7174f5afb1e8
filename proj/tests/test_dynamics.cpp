#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "flexcouple/dynamics.hpp"
#include "flexcouple/rng.hpp"

using namespace flexcouple;

namespace {

constexpr double kPi = std::numbers::pi;

// Exact state under constant (v, w) with zero accelerations: circular arc
// (or straight line when w = 0).
RobotState arc_solution(const RobotState& x0, double t) {
  RobotState x = x0;
  x.theta = wrap_angle(x0.theta + x0.w * t);
  if (std::abs(x0.w) < 1e-12) {
    x.px = x0.px + x0.v * t * std::cos(x0.theta);
    x.py = x0.py + x0.v * t * std::sin(x0.theta);
  } else {
    const double r = x0.v / x0.w;
    x.px = x0.px + r * (std::sin(x0.theta + x0.w * t) - std::sin(x0.theta));
    x.py = x0.py - r * (std::cos(x0.theta + x0.w * t) - std::cos(x0.theta));
  }
  return x;
}

double position_distance(const RobotState& a, const RobotState& b) {
  return std::hypot(a.px - b.px, a.py - b.py);
}

}  // namespace

TEST_CASE("state derivative reads straight off the model") {
  const auto d1 = state_derivative({0, 0, 0, 1, 0}, {0, 0});
  CHECK(d1[0] == 1.0);
  CHECK(d1[1] == 0.0);
  CHECK(d1[2] == 0.0);

  const auto d2 = state_derivative({0, 0, kPi / 2, 1, 0}, {0, 0});
  CHECK(d2[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(d2[1] == doctest::Approx(1.0));

  const auto d3 = state_derivative({0, 0, 0, 0, 0.5}, {0.1, -0.2});
  CHECK(d3[0] == 0.0);
  CHECK(d3[1] == 0.0);
  CHECK(d3[2] == 0.5);
  CHECK(d3[3] == 0.1);
  CHECK(d3[4] == -0.2);
}

TEST_CASE("euler_step integrates one period and re-wraps the heading") {
  const RobotState x1 = euler_step({0, 0, 0, 1, 0}, {0, 0}, 0.1);
  CHECK(x1.px == doctest::Approx(0.1));
  CHECK(x1.py == 0.0);
  CHECK(x1.theta == 0.0);
  CHECK(x1.v == 1.0);

  const RobotState still = euler_step({0, 0, 0, 0, 0}, {0, 0}, 0.1);
  CHECK(still.px == 0.0);
  CHECK(still.py == 0.0);
  CHECK(still.v == 0.0);

  // heading crosses the seam and comes back wrapped
  const RobotState spun = euler_step({0, 0, kPi - 0.01, 0, 0.5}, {0, 0}, 0.1);
  CHECK(spun.theta == doctest::Approx(-kPi + 0.04).epsilon(1e-9));
  CHECK(spun.theta <= kPi);
  CHECK(spun.theta > -kPi);

  // the (v, w) subsystem is linear in u, so Euler is exact there
  const RobotState acc = euler_step({0, 0, 0, 0.3, -0.4}, {0.25, 0.5}, 0.1);
  CHECK(acc.v == doctest::Approx(0.325).epsilon(1e-15));
  CHECK(acc.w == doctest::Approx(-0.35).epsilon(1e-15));
}

TEST_CASE("rk4 reproduces the circular-arc closed form") {
  // single step against the analytic arc
  const RobotState x0{0.02, -0.01, 0.3, 0.05, 1.0};
  const RobotState one = rk4_step(x0, {0, 0}, 0.1);
  const RobotState ref = arc_solution(x0, 0.1);
  CHECK(position_distance(one, ref) < 1e-8);
  CHECK(std::abs(wrap_angle(one.theta - ref.theta)) < 1e-12);

  // pure rotation integrates the heading exactly
  const RobotState rot = rk4_step({0, 0, 0, 0, 1.0}, {0, 0}, 0.1);
  CHECK(rot.theta == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(rot.px == 0.0);
  CHECK(rot.py == 0.0);

  // zero input, zero velocity: identity
  const RobotState idle = rk4_step({0.5, 0.5, 1.0, 0, 0}, {0, 0}, 0.1);
  CHECK(idle.px == 0.5);
  CHECK(idle.py == 0.5);
  CHECK(idle.theta == 1.0);

  // radius stays v/w to 1e-6 over a full revolution
  const double v = 0.05, w = 1.0, r = v / w;
  RobotState x{0, 0, 0, v, w};
  const Point2 center{x.px - r * std::sin(x.theta),
                      x.py + r * std::cos(x.theta)};
  const int steps = static_cast<int>(std::ceil(2.0 * kPi / w / 0.1));
  for (int k = 0; k < steps; ++k) {
    x = rk4_step(x, {0, 0}, 0.1);
    const double radius = std::hypot(x.px - center.x, x.py - center.y);
    CHECK(std::abs(radius - r) < 1e-6);
  }
}

TEST_CASE("euler tracks rk4 within 1 mm over 1 s in the driving envelope") {
  // constant commands with |v| <= 0.1 and gentle turning |w| <= 0.2; the
  // divergence grows like v*w*dt*t/2, so this envelope is where the two
  // integrators are interchangeable (the regime the controller plans in)
  UniformRng rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    RobotState e{rng.symmetric(1.0), rng.symmetric(1.0), rng.symmetric(kPi),
                 rng.symmetric(0.1), rng.symmetric(0.2)};
    RobotState r4 = e;
    for (int k = 0; k < 10; ++k) {
      e = euler_step(e, {0, 0}, 0.1);
      r4 = rk4_step(r4, {0, 0}, 0.1);
    }
    worst = std::max(worst, position_distance(e, r4));
  }
  CHECK(worst < 1e-3);

  // pure rotation produces zero position divergence at any rate
  RobotState e{0, 0, 0, 0, 2.0};
  RobotState r4 = e;
  for (int k = 0; k < 10; ++k) {
    e = euler_step(e, {0, 0}, 0.1);
    r4 = rk4_step(r4, {0, 0}, 0.1);
  }
  CHECK(position_distance(e, r4) == 0.0);
}

TEST_CASE("butterfly feasibility and the printed-form flag") {
  ActuationLimits lim;
  lim.validate();

  CHECK(state_feasible({0, 0, 0, 0, 0}, lim));
  CHECK_FALSE(state_feasible({0, 0, 0, 0, lim.w_max}, lim));  // spin in place
  CHECK(state_feasible({0, 0, 0, lim.butterfly_ratio * lim.w_max, lim.w_max},
                       lim));  // boundary ray
  CHECK(state_feasible({0, 0, 0, 0.05, 0}, lim));
  CHECK_FALSE(state_feasible({0, 0, 0, 0.051, 0}, lim));  // over v_max
  CHECK_FALSE(state_feasible({0, 0, 0, 0.05, 2.1}, lim)); // over w_max
  // symmetric under (v, w) -> (-v, -w)
  CHECK(state_feasible({0, 0, 0, -0.02, -1.0}, lim));
  CHECK(state_feasible({0, 0, 0, 0.02, 1.0}, lim));

  ActuationLimits printed = lim;
  printed.butterfly_printed_form = true;
  // the published inequality v <= |(w_max/v_max) w| forbids straight-line
  // motion (v > 0, w = 0) — kept only as a comparison flag
  CHECK_FALSE(state_feasible({0, 0, 0, 0.01, 0}, printed));
  CHECK(state_feasible({0, 0, 0, 0.01, 1.0}, printed));

  CHECK(control_feasible({7.35, -50.0}, lim));
  CHECK_FALSE(control_feasible({7.36, 0}, lim));
  const ControlInput clamped = clamp_control({100.0, -100.0}, lim);
  CHECK(clamped.vdot == 7.35);
  CHECK(clamped.wdot == -50.0);

  ActuationLimits bad = lim;
  bad.butterfly_ratio = 0.05;  // butterfly floor above v_max: empty set
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("wiggle command and one-step velocity tracking") {
  WiggleParams wp;
  wp.validate();

  const VelocityCommand at0 = wiggle_command(0.0, wp);
  CHECK(at0.v == wp.v_bias);
  CHECK(at0.w == doctest::Approx(0.0).epsilon(1e-12));

  const double quarter = 0.5 * kPi / wp.angular_frequency;
  CHECK(wiggle_command(quarter, wp).w ==
        doctest::Approx(wp.w_amplitude).epsilon(1e-12));

  const double period = 2.0 * kPi / wp.angular_frequency;
  for (double t = 0.0; t < 2.0; t += 0.17) {
    CHECK(wiggle_command(t, wp).w ==
          doctest::Approx(wiggle_command(t + period, wp).w).epsilon(1e-9));
    CHECK(wiggle_command(t, wp).v == wp.v_bias);
  }

  // tracking reaches a reachable command in exactly one step
  ActuationLimits lim;
  const RobotState x{0, 0, 0, 0.01, -0.3};
  const ControlInput u = track_velocity(x, {0.02, 0.5}, 0.1, lim);
  const RobotState next = euler_step(x, u, 0.1);
  CHECK(next.v == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(next.w == doctest::Approx(0.5).epsilon(1e-12));

  // unreachable jumps saturate at the control box
  const ControlInput big = track_velocity({0, 0, 0, 0, 0}, {10.0, 100.0},
                                          0.01, lim);
  CHECK(big.vdot == lim.vdot_max);
  CHECK(big.wdot == lim.wdot_max);
}
