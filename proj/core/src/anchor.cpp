#include "flexcouple/anchor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flexcouple {

namespace {

constexpr double kTol = 1e-12;

double force_at(const std::vector<ForceProfile::Knot>& curve, double d) {
  if (d <= curve.front().first) return curve.front().second;
  if (d >= curve.back().first) return curve.back().second;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (d <= curve[i].first) {
      const auto& [a, fa] = curve[i - 1];
      const auto& [b, fb] = curve[i];
      return fa + (d - a) / (b - a) * (fb - fa);
    }
  }
  return curve.back().second;
}

// Farthest displacement in [d0, d_cap] reachable by a quasi-static force F
// pushing along `curve`: advances while F >= resistance, stops at the first
// crossing where the (piecewise-linear) resistance rises above F.
double quasi_static_advance(const std::vector<ForceProfile::Knot>& curve,
                            double F, double d0, double d_cap) {
  if (d_cap <= d0) return d0;
  if (force_at(curve, d0) > F + kTol) return d0;
  double d = d0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const auto& [a, fa] = curve[i - 1];
    const auto& [b, fb] = curve[i];
    if (b <= d) continue;
    const double seg_lo = std::max(a, d);
    const double seg_hi = std::min(b, d_cap);
    if (seg_hi <= seg_lo) break;
    const double f_hi = force_at(curve, seg_hi);
    if (f_hi <= F + kTol) {
      d = seg_hi;
      if (d >= d_cap) return d_cap;
      continue;
    }
    // resistance crosses F inside this segment (rising there)
    const double slope = (fb - fa) / (b - a);
    const double d_cross = a + (F - fa) / slope;
    return std::clamp(d_cross, seg_lo, seg_hi);
  }
  // flat extrapolation past the last knot
  if (d >= curve.back().first && curve.back().second <= F + kTol) return d_cap;
  return d;
}

}  // namespace

double ForceProfile::forward_force(double d) const {
  return force_at(forward, d);
}

double ForceProfile::backward_force(double d) const {
  return force_at(backward, d);
}

void ForceProfile::validate() const {
  const auto check_curve = [](const std::vector<Knot>& c, const char* name) {
    if (c.size() < 2) throw std::invalid_argument(std::string(name) + ": need >= 2 knots");
    if (c.front().first != 0.0)
      throw std::invalid_argument(std::string(name) + ": must start at displacement 0");
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c[i].second < 0.0)
        throw std::invalid_argument(std::string(name) + ": negative force");
      if (i > 0 && c[i].first <= c[i - 1].first)
        throw std::invalid_argument(std::string(name) + ": displacements must increase");
    }
  };
  check_curve(forward, "forward");
  check_curve(backward, "backward");
  if (forward.back().first != backward.back().first)
    throw std::invalid_argument("curves must share the engagement span");
  if (pullout_displacement <= 0.0 ||
      pullout_displacement > forward.back().first)
    throw std::invalid_argument("pullout_displacement out of range");
  if (slip_displacement <= 0.0 || slip_displacement > backward.back().first)
    throw std::invalid_argument("slip_displacement out of range");
}

ForceProfile default_force_profile() {
  ForceProfile p;
  p.forward = {{0.000, 0.00}, {0.001, 0.12}, {0.002, 0.20},
               {0.003, 0.12}, {0.004, 0.05}, {0.005, 0.02}};
  p.backward = {{0.000, 0.00},  {0.001, 0.45}, {0.002, 0.55}, {0.003, 0.60},
                {0.004, 0.60},  {0.0047, 0.60}, {0.005, 0.25}};
  p.pullout_displacement = 0.003;
  p.slip_displacement = 0.0047;
  p.hold_load_kg = 0.5;
  return p;
}

void AnchorParams::validate() const {
  profile.validate();
  if (joint_travel <= 0.0) throw std::invalid_argument("joint_travel must be > 0");
  if (yaw_limit <= 0.0) throw std::invalid_argument("yaw_limit must be > 0");
  if (yaw_release_threshold <= 0.0 || yaw_release_threshold >= 2.0 * yaw_limit)
    throw std::invalid_argument(
        "yaw_release_threshold must be in (0, 2*yaw_limit): the release "
        "sweep has to be reachable inside the joint envelope");
  if (yaw_window_s <= 0.0) throw std::invalid_argument("yaw_window_s must be > 0");
  if (push_force_max <= 0.0 || force_speed_ref <= 0.0)
    throw std::invalid_argument("drive force parameters must be > 0");
}

std::pair<AnchorJointState, CouplingOutcome> resolve_push(
    const AnchorJointState& joint, double axial_force,
    const AnchorParams& params, double max_advance) {
  if (joint.tip_seated)  // seated joints ride the holder, not the beams
    return {joint, {CouplingEvent::none, joint.insertion, 0.0}};
  if (axial_force <= 0.0)  // nothing pushing: not a stall, just no motion
    return {joint,
            {CouplingEvent::none, joint.insertion,
             params.profile.forward_force(joint.insertion)}};

  const double span = params.profile.engagement_span();
  const double d0 = std::clamp(joint.insertion, 0.0, span);
  const double d_cap = std::min(span, d0 + std::max(0.0, max_advance));
  const double d1 =
      quasi_static_advance(params.profile.forward, axial_force, d0, d_cap);

  AnchorJointState out = joint;
  CouplingOutcome oc;
  oc.displacement = d1;
  oc.resistance = params.profile.forward_force(d1);
  if (d1 >= span - kTol) {
    out.insertion = span;
    out.tip_seated = true;
    out.pull_stretch = 0.0;
    oc.event = CouplingEvent::inserted;
  } else {
    out.insertion = d1;
    oc.event = (d1 < d_cap - kTol) ? CouplingEvent::blocked
                                   : CouplingEvent::none;
  }
  return {out, oc};
}

std::pair<AnchorJointState, CouplingOutcome> resolve_pull(
    const AnchorJointState& joint, double axial_force,
    std::span<const double> yaw_history, const AnchorParams& params,
    double max_retreat) {
  AnchorJointState out = joint;

  bool released_now = false;
  if (out.tip_seated && !yaw_history.empty()) {
    const auto [lo, hi] =
        std::minmax_element(yaw_history.begin(), yaw_history.end());
    if (*hi - *lo >= params.yaw_release_threshold) {
      out.tip_seated = false;  // tips folded back in; stays released
      released_now = true;
    }
  }

  CouplingOutcome oc;
  if (axial_force <= 0.0) {  // no tension: elastic stretch relaxes
    out.pull_stretch = 0.0;
    oc.displacement = 0.0;
    oc.resistance = 0.0;
    return {out, oc};
  }

  // A tip that was never seated (or released on an earlier call) holds
  // nothing: the beams are still folded, so any tension frees the anchor.
  // Only the releasing call itself drags the tips out through the mouth,
  // paying the forward (insertion) hump once more.
  if (!joint.tip_seated) {
    out.insertion = 0.0;
    out.pull_stretch = 0.0;
    oc.displacement = params.profile.pullout_displacement;
    oc.resistance = 0.0;
    oc.event = CouplingEvent::ejected;
    return {out, oc};
  }

  const auto& barrier =
      released_now ? params.profile.forward : params.profile.backward;
  const double pullout = params.profile.pullout_displacement;
  const double d0 = std::clamp(out.pull_stretch, 0.0, pullout);
  const double d_cap = std::min(pullout, d0 + std::max(0.0, max_retreat));
  const double d1 = quasi_static_advance(barrier, axial_force, d0, d_cap);

  out.pull_stretch = d1;
  oc.displacement = d1;
  oc.resistance = force_at(barrier, d1);
  if (d1 >= pullout - kTol) {
    out.tip_seated = false;
    out.insertion = 0.0;
    out.pull_stretch = 0.0;
    oc.event = CouplingEvent::ejected;
  } else {
    oc.event = (d1 < d_cap - kTol) ? CouplingEvent::blocked
                                   : CouplingEvent::none;
  }
  return {out, oc};
}

std::pair<AnchorJointState, bool> clamp_joint(const Pose2& owner_pose,
                                              const Pose2& other_pose,
                                              const RobotFootprint& fp,
                                              const AnchorParams& params) {
  const Point2 c_own =
      transform_point(owner_pose, fp.connection_offset(Face::back));
  const Point2 c_oth =
      transform_point(other_pose, fp.connection_offset(Face::front));
  const Point2 fwd{std::cos(owner_pose.heading), std::sin(owner_pose.heading)};
  const Point2 delta = c_own - c_oth;
  const double d_axial = fwd.dot(delta);     // + = owner pulling away
  const double lateral = fwd.cross(delta);   // seat side-load arm
  const double yaw_raw = wrap_angle(owner_pose.heading - other_pose.heading);

  const double travel = params.joint_travel;
  const double insertion_raw = 0.5 * travel - d_axial;

  AnchorJointState j;
  j.insertion = std::clamp(insertion_raw, 0.0, travel);
  j.yaw = std::clamp(yaw_raw, -params.yaw_limit, params.yaw_limit);
  j.tip_seated = true;
  j.pull_stretch =
      std::clamp(-insertion_raw, 0.0, params.profile.pullout_displacement);

  const bool violated =
      std::abs(yaw_raw) > params.yaw_limit ||
      std::abs(lateral) > fp.seat_recess ||
      -insertion_raw > params.profile.pullout_displacement + 1e-9;
  return {j, violated};
}

double axial_drive_force(double speed, const AnchorParams& params) {
  if (speed <= 0.0) return 0.0;
  return params.push_force_max * std::min(1.0, speed / params.force_speed_ref);
}

}  // namespace flexcouple
