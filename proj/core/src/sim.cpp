#include "flexcouple/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace flexcouple {
namespace {

constexpr double kTiny = 1e-12;
// Hard cap on any body-overlap correction per sim step: contacts resolve
// over a few steps instead of teleporting.
constexpr double kMaxBodyPush = 0.001;

Point2 heading_axis(double theta) { return {std::cos(theta), std::sin(theta)}; }
Point2 left_axis(double theta) { return {-std::sin(theta), std::cos(theta)}; }
Point2 velocity_vec(const RobotState& s) { return heading_axis(s.theta) * s.v; }

void shift(RobotState& r, const Point2& d) {
  r.px += d.x;
  r.py += d.y;
}

// Apply a relative correction `d` between two bodies, split evenly: `a`
// moves by d/2, `b` by -d/2.
void split_shift(RobotState& a, RobotState& b, const Point2& d) {
  shift(a, d * 0.5);
  shift(b, d * -0.5);
}

}  // namespace

const char* to_string(WorldEvent::Kind kind) {
  switch (kind) {
    case WorldEvent::Kind::engaged: return "engaged";
    case WorldEvent::Kind::inserted: return "inserted";
    case WorldEvent::Kind::released: return "released";
    case WorldEvent::Kind::ejected: return "ejected";
    case WorldEvent::Kind::fault: return "fault";
  }
  return "?";
}

void WorldConfig::validate() const {
  footprint.validate();
  limits.validate();
  anchor.validate();
  if (!(slit_halfwidth > 0.0) || slit_halfwidth > footprint.mouth_halfwidth)
    throw std::invalid_argument(
        "slit_halfwidth must lie in (0, mouth_halfwidth]");
  if (!(capture_depth > 0.0))
    throw std::invalid_argument("capture_depth must be positive");
  if (lateral_play < 0.0 || lateral_play > footprint.seat_recess)
    throw std::invalid_argument("lateral_play must lie in [0, seat_recess]");
  if (contact_slop < 0.0)
    throw std::invalid_argument("contact_slop must be >= 0");
  if (!(bend_jam_rad > 0.0))
    throw std::invalid_argument("bend_jam_rad must be positive");
  if (!(jam_depth_m > 0.0) || jam_depth_m > footprint.anchor_length)
    throw std::invalid_argument("jam_depth_m must lie in (0, anchor_length]");
}

WorldConfig make_world_config(const ScenarioConfig& cfg) {
  WorldConfig wc;
  wc.footprint = cfg.footprint;
  wc.limits = cfg.limits;
  wc.anchor = cfg.anchor;
  wc.slit_halfwidth = cfg.contact.slit_halfwidth_m;
  wc.capture_depth = cfg.contact.capture_depth_m;
  wc.lateral_play = cfg.contact.lateral_play_m;
  wc.contact_slop = cfg.contact.contact_slop_m;
  wc.bend_jam_rad = cfg.contact.bend_jam_rad;
  wc.jam_depth_m = cfg.contact.jam_depth_m;
  return wc;
}

World::World(WorldConfig config, std::vector<RobotState> robots)
    : config_(std::move(config)), robots_(std::move(robots)) {
  config_.validate();
  if (robots_.empty())
    throw std::invalid_argument("world needs at least one robot");
}

void World::set_registry(PairRegistry registry) {
  registry.validate();
  for (const ConnectionPair& p : registry.pairs) {
    const int n = static_cast<int>(robots_.size());
    if (p.robot_a < 0 || p.robot_a >= n || p.robot_b < 0 || p.robot_b >= n)
      throw std::invalid_argument("registry references an unknown robot");
  }
  registry_ = std::move(registry);
  contacts_.assign(registry_.pairs.size(), PairContact{});
}

void World::force_couple(int pair_index) {
  if (pair_index < 0 ||
      pair_index >= static_cast<int>(registry_.pairs.size()))
    throw std::invalid_argument("force_couple: pair index out of range");
  const ConnectionPair& p =
      registry_.pairs[static_cast<std::size_t>(pair_index)];
  if (p.type == PairType::anchor) {
    const auto [jg, violated] = clamp_joint(
        robots_[static_cast<std::size_t>(p.owner_robot())].pose(),
        robots_[static_cast<std::size_t>(p.opening_robot())].pose(),
        config_.footprint, config_.anchor);
    if (violated)
      throw std::invalid_argument("force_couple: robots not at a coupled pose");
    PairContact& c = contacts_[static_cast<std::size_t>(pair_index)];
    c = PairContact{};
    c.joint = jg;
    c.engaged = true;
  }
  mark_connected(registry_, pair_index);
}

void World::step(std::span<const ControlInput> controls, double dt) {
  if (controls.size() != robots_.size())
    throw std::invalid_argument("one control per robot required");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  for (std::size_t i = 0; i < robots_.size(); ++i) {
    const ControlInput u = clamp_control(controls[i], config_.limits);
    robots_[i] = euler_step(robots_[i], u, dt);
    robots_[i].v =
        std::clamp(robots_[i].v, -config_.limits.v_max, config_.limits.v_max);
    robots_[i].w =
        std::clamp(robots_[i].w, -config_.limits.w_max, config_.limits.w_max);
  }
  for (std::size_t k = 0; k < registry_.pairs.size(); ++k) {
    if (registry_.pairs[k].type == PairType::anchor && !contacts_[k].faulted)
      resolve_anchor_pair(static_cast<int>(k), dt);
  }
  resolve_body_overlaps();
  time_ += dt;
}

void World::push_yaw(PairContact& c, double yaw, double dt) {
  const auto cap = static_cast<std::size_t>(std::max<long long>(
      1, std::llround(config_.anchor.yaw_window_s / dt)));
  if (c.yaw_ring.size() != cap) {
    c.yaw_ring.assign(cap, 0.0);
    c.yaw_next = 0;
    c.yaw_full = false;
  }
  c.yaw_ring[c.yaw_next] = yaw;
  c.yaw_next = (c.yaw_next + 1) % cap;
  if (c.yaw_next == 0) c.yaw_full = true;
}

void World::unlink_pair(int pair_index, WorldEvent::Kind kind) {
  events_.push_back({time_, pair_index, kind});
  ConnectionPair& pr = registry_.pairs[static_cast<std::size_t>(pair_index)];
  pr.status = PairStatus::decoupled;
  pr.entry_mode = EntryMode::unset;  // a fresh attempt re-plans its entry
  std::erase(registry_.connected, pair_index);
  std::erase(registry_.active, pair_index);
}

void World::resolve_anchor_pair(int pair_index, double dt) {
  const RobotFootprint& fp = config_.footprint;
  const AnchorParams& ap = config_.anchor;
  const auto k = static_cast<std::size_t>(pair_index);
  ConnectionPair& pair = registry_.pairs[k];
  PairContact& c = contacts_[k];
  RobotState& own = robots_[static_cast<std::size_t>(pair.owner_robot())];
  RobotState& opp = robots_[static_cast<std::size_t>(pair.opening_robot())];
  const double span = ap.profile.engagement_span();

  // Head position in the opening robot's frame drives everything pre-seat.
  auto head_in_opening = [&]() {
    return inverse_transform_point(
        opp.pose(), transform_point(own.pose(), fp.anchor_head_offset()));
  };
  // Switch the joint back to beam-travel bookkeeping at the current depth
  // (release / ejection leave the head physically wherever it is).
  auto ride_geometry = [&]() {
    const double pen = fp.half_depth - head_in_opening().x;
    c.engaged = pen > 0.0;
    const bool seated = c.joint.tip_seated;
    c.joint = AnchorJointState{};
    c.joint.tip_seated = seated;
    c.joint.insertion = std::clamp(pen - fp.anchor_length, 0.0, span);
  };

  if (c.joint.tip_seated) {
    const auto [jg, violated] = clamp_joint(own.pose(), opp.pose(), fp, ap);
    if (violated) {
      c.faulted = true;
      c.engaged = false;
      c.joint = AnchorJointState{};
      unlink_pair(pair_index, WorldEvent::Kind::fault);
      return;
    }
    c.joint.yaw = jg.yaw;
    push_yaw(c, jg.yaw, dt);

    const Point2 fwd = heading_axis(own.theta);
    const double s_dot = fwd.dot(velocity_vec(own) - velocity_vec(opp));
    if (s_dot > 0.0) {
      auto [joint2, oc] =
          resolve_pull(c.joint, axial_drive_force(s_dot, ap), c.yaw_history(),
                       ap, s_dot * dt);
      c.joint = joint2;
      if (oc.event == CouplingEvent::ejected) {
        unlink_pair(pair_index, WorldEvent::Kind::ejected);
        ride_geometry();
        return;
      }
    } else {
      // No tension: stretch relaxes; a wiggle sweep can still fold the tips.
      auto [joint2, oc] = resolve_pull(c.joint, 0.0, c.yaw_history(), ap);
      (void)oc;
      c.joint = joint2;
    }

    // Project the pair back into the joint envelope: free axial travel plus
    // the force-resolved stretch, and snug lateral play at the seat.
    const Point2 c_own =
        transform_point(own.pose(), fp.connection_offset(pair.owner_face()));
    const Point2 c_opp =
        transform_point(opp.pose(), fp.connection_offset(pair.opening_face()));
    const Point2 delta = c_own - c_opp;
    const double d_ax = fwd.dot(delta);
    const double d_max = 0.5 * ap.joint_travel + c.joint.pull_stretch;
    const double d_min = -0.5 * ap.joint_travel;
    if (d_ax > d_max)
      split_shift(own, opp, fwd * -(d_ax - d_max));
    else if (d_ax < d_min)
      split_shift(own, opp, fwd * (d_min - d_ax));
    const double lat = fwd.cross(delta);
    if (std::abs(lat) > config_.lateral_play) {
      const double excess =
          lat - std::clamp(lat, -config_.lateral_play, config_.lateral_play);
      split_shift(own, opp, left_axis(own.theta) * -excess);
    }
    if (c.joint.tip_seated) {
      c.joint.insertion = std::clamp(
          0.5 * ap.joint_travel - std::clamp(d_ax, d_min, d_max), 0.0,
          ap.joint_travel);
    } else {
      // The wiggle sweep folded the tips without ejecting: the head now
      // just rides the channel.
      events_.push_back({time_, pair_index, WorldEvent::Kind::released});
      ride_geometry();
    }
    return;
  }

  // ---- tips not seated ------------------------------------------------
  Point2 head_q = head_in_opening();
  double pen = fp.half_depth - head_q.x;
  const double rel = wrap_angle(own.theta - opp.theta);

  // A released head still logically connected: any separating tension
  // frees it (the releasing call already paid the slide-out barrier).
  const bool connected_now =
      std::find(registry_.connected.begin(), registry_.connected.end(),
                pair_index) != registry_.connected.end();
  if (connected_now) {
    const Point2 fwd = heading_axis(own.theta);
    const double s_dot = fwd.dot(velocity_vec(own) - velocity_vec(opp));
    if (s_dot > 0.0) {
      auto [joint2, oc] =
          resolve_pull(c.joint, axial_drive_force(s_dot, ap), c.yaw_history(),
                       ap, s_dot * dt);
      c.joint = joint2;
      if (oc.event == CouplingEvent::ejected) {
        unlink_pair(pair_index, WorldEvent::Kind::ejected);
        ride_geometry();
      }
      return;
    }
    // Pushing back in falls through to the channel logic (can re-seat).
  }

  c.wedged = false;
  if (!c.engaged) {
    if (pen >= 0.0 && pen <= config_.capture_depth &&
        std::abs(head_q.y) <= fp.mouth_halfwidth &&
        std::abs(rel) <= fp.mouth_max_angle) {
      c.engaged = true;
      c.joint.insertion = 0.0;
      c.entry_bend = std::abs(rel) + std::abs(head_q.y) / fp.anchor_length;
      events_.push_back({time_, pair_index, WorldEvent::Kind::engaged});
    } else {
      // Head struck the body outside the capture window (the lip jam):
      // reject it along the cheapest axis. Frictionless, so the pair can
      // still slide along the face and recover alignment.
      if (std::abs(head_q.x) < fp.half_depth &&
          std::abs(head_q.y) < fp.half_width) {
        const double push_front = fp.half_depth - head_q.x;
        const double push_back = head_q.x + fp.half_depth;
        const double push_left = fp.half_width - head_q.y;
        const double push_right = head_q.y + fp.half_width;
        const double m =
            std::min({push_front, push_back, push_left, push_right});
        Point2 dir;  // head correction in the opening frame
        if (m == push_front)
          dir = {m, 0.0};
        else if (m == push_back)
          dir = {-m, 0.0};
        else if (m == push_left)
          dir = {0.0, m};
        else
          dir = {0.0, -m};
        const Point2 fq = heading_axis(opp.theta);
        const Point2 lq = left_axis(opp.theta);
        split_shift(own, opp,
                    Point2{fq.x * dir.x + lq.x * dir.y,
                           fq.y * dir.x + lq.y * dir.y});
      }
      return;
    }
  }

  // ---- engaged: head rides the narrowing channel -----------------------
  if (pen < -kTiny) {  // slid clear of the mouth
    c.engaged = false;
    c.joint = AnchorJointState{};
    c.entry_bend = 0.0;
    return;
  }
  const double y_allow =
      fp.mouth_halfwidth +
      (config_.slit_halfwidth - fp.mouth_halfwidth) *
          std::clamp(pen / fp.anchor_length, 0.0, 1.0);
  if (std::abs(head_q.y) > y_allow) {
    // Channel wall: center the head. In the narrowing taper a pressed-in
    // head binds (wedge); along the parallel slit past the taper the wall
    // just guides, so insertion can still advance.
    const double excess = head_q.y - std::clamp(head_q.y, -y_allow, y_allow);
    split_shift(own, opp, left_axis(opp.theta) * -excess);
    c.wedged = pen < fp.anchor_length;
  }
  c.wedged = c.wedged || std::abs(rel) > fp.mouth_max_angle;
  // A head that entered badly bent binds against the channel wall before
  // the tip can reach the seat: cap its depth and hold the excess out.
  if (c.entry_bend > config_.bend_jam_rad && pen > config_.jam_depth_m) {
    split_shift(own, opp, heading_axis(opp.theta) * (pen - config_.jam_depth_m));
    pen = config_.jam_depth_m;
    c.wedged = true;
  }
  c.joint.yaw = rel;

  const double d_geo = pen - fp.anchor_length;
  if (d_geo > c.joint.insertion + kTiny) {
    if (!c.wedged) {
      const Point2 fq = heading_axis(opp.theta);
      const double closing = fq.dot(velocity_vec(opp) - velocity_vec(own));
      auto [joint2, oc] =
          resolve_push(c.joint, axial_drive_force(closing, ap), ap,
                       d_geo - c.joint.insertion);
      c.joint = joint2;
      if (oc.event == CouplingEvent::inserted) {
        events_.push_back({time_, pair_index, WorldEvent::Kind::inserted});
        c.yaw_ring.clear();
        c.yaw_next = 0;
        c.yaw_full = false;
        const auto [jg, violated] = clamp_joint(own.pose(), opp.pose(), fp, ap);
        (void)violated;  // next step's envelope check handles any breach
        c.joint = jg;
        return;
      }
    }
    // Stalled, force-capped, or wedged: hold the unresolved closure out.
    const double leftover = d_geo - c.joint.insertion;
    if (leftover > kTiny)
      split_shift(own, opp, heading_axis(opp.theta) * leftover);
  } else if (d_geo < c.joint.insertion - kTiny) {
    c.joint.insertion = std::max(0.0, d_geo);  // unseated tips hold nothing
  }
}

void World::resolve_body_overlaps() {
  const RobotFootprint& fp = config_.footprint;
  const auto n = static_cast<int>(robots_.size());
  std::vector<std::pair<int, int>> skip;
  for (std::size_t k = 0; k < registry_.pairs.size(); ++k) {
    const ConnectionPair& p = registry_.pairs[k];
    const PairContact& c = contacts_[k];
    if (p.type == PairType::anchor && (c.engaged || c.joint.tip_seated))
      skip.emplace_back(std::min(p.robot_a, p.robot_b),
                        std::max(p.robot_a, p.robot_b));
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (std::find(skip.begin(), skip.end(), std::make_pair(i, j)) !=
          skip.end())
        continue;
      RobotState& a = robots_[static_cast<std::size_t>(i)];
      RobotState& b = robots_[static_cast<std::size_t>(j)];
      const Point2 fa = heading_axis(a.theta), la = left_axis(a.theta);
      const Point2 fb = heading_axis(b.theta), lb = left_axis(b.theta);
      const Point2 d{b.px - a.px, b.py - a.py};
      const Point2 axes[4] = {fa, la, fb, lb};
      double best = std::numeric_limits<double>::infinity();
      Point2 best_axis;
      bool separated = false;
      for (const Point2& axis : axes) {
        const double dist = axis.dot(d);
        const double ext_a = fp.half_depth * std::abs(axis.dot(fa)) +
                             fp.half_width * std::abs(axis.dot(la));
        const double ext_b = fp.half_depth * std::abs(axis.dot(fb)) +
                             fp.half_width * std::abs(axis.dot(lb));
        const double overlap = ext_a + ext_b - std::abs(dist);
        if (overlap <= config_.contact_slop) {
          separated = true;
          break;
        }
        if (overlap < best) {
          best = overlap;
          best_axis = axis * (dist >= 0.0 ? 1.0 : -1.0);
        }
      }
      if (separated) continue;
      const double push =
          std::min(best - config_.contact_slop, kMaxBodyPush);
      split_shift(b, a, best_axis * push);
    }
  }
}

// ---- scenario runner ------------------------------------------------------

RunResult run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();

  std::vector<RobotState> initial;
  initial.reserve(cfg.robots.size());
  for (const Pose2& p : cfg.robots)
    initial.push_back({p.position.x, p.position.y, wrap_angle(p.heading),
                       0.0, 0.0});

  World world(make_world_config(cfg), std::move(initial));
  const bool has_target = !cfg.target.slots.empty();
  if (has_target) {
    const std::vector<GoalPair> goal =
        assign_connection_pairs(cfg.target, world.robots());
    PairRegistry reg;
    reg.pairs = augment_pairs(goal, cfg.footprint);
    reg.epsilon = cfg.controller.mpc.epsilon;
    world.set_registry(std::move(reg));
    for (int idx : cfg.preconnected) world.force_couple(idx);
  }

  RecedingHorizonController controller(cfg.controller, cfg.footprint,
                                       static_cast<int>(cfg.robots.size()));

  RunResult out;
  const auto n = cfg.robots.size();
  auto record = [&](int phase, const std::vector<ControlInput>& u,
                    const SolveStats& stats) {
    StepRecord rec;
    rec.t = world.time();
    rec.phase = phase;
    rec.states = world.robots();
    rec.controls = u;
    rec.statuses.reserve(world.registry().pairs.size());
    for (const ConnectionPair& p : world.registry().pairs)
      rec.statuses.push_back(p.status);
    rec.solver = stats;
    out.log.push_back(std::move(rec));
  };
  record(-1, std::vector<ControlInput>(n), SolveStats{});

  const int substeps = static_cast<int>(
      std::llround(cfg.control_dt_s / cfg.sim_dt_s));
  bool had_connection = !world.registry().connected.empty();
  const bool has_pairs = !world.registry().pairs.empty();

  for (std::size_t phase_index = 0;
       phase_index < cfg.schedule.size() && !out.failsafe_abort;
       ++phase_index) {
    const PhaseSpec& phase = cfg.schedule[phase_index];
    controller.reset();
    const int phase_steps = static_cast<int>(
        std::ceil(phase.duration_s / cfg.control_dt_s - 1e-9));
    for (int step = 0; step < phase_steps; ++step) {
      std::vector<ControlInput> u(n);
      SolveStats stats{};
      if (phase.kind != PhaseKind::wiggle) {
        BehaviorSpec spec;
        if (phase.kind == PhaseKind::align) {
          assign_active_pairs(world.registry(), world.robots(),
                              cfg.footprint);
          spec.kind = BehaviorKind::connect;
          spec.align =
              align_terms(world.registry(), world.robots(), cfg.footprint);
        } else if (phase.kind == PhaseKind::goto_goal) {
          spec.kind = BehaviorKind::goto_goal;
          spec.goals = phase.goals;
        } else {
          spec.kind = BehaviorKind::velocity;
          spec.velocity_targets = phase.commands;
        }
        u = controller.step(world.robots(), spec,
                            maintained_pairs(world.registry(), cfg.footprint));
        stats = controller.last_stats();
        if (stats.converged)
          out.max_pip_violation =
              std::max(out.max_pip_violation, stats.max_pip_violation);
        if (controller.exhausted()) {
          out.failsafe_abort = true;
          break;
        }
      }
      for (int s = 0; s < substeps; ++s) {
        if (phase.kind == PhaseKind::wiggle) {
          const double t_local =
              (static_cast<double>(step) * substeps + s) * cfg.sim_dt_s;
          const VelocityCommand shake = wiggle_command(t_local, cfg.wiggle);
          for (std::size_t r = 0; r < n; ++r) {
            const bool shaking =
                std::find(phase.wiggle_robots.begin(),
                          phase.wiggle_robots.end(),
                          static_cast<int>(r)) != phase.wiggle_robots.end();
            u[r] = track_velocity(world.robots()[r],
                                  shaking ? shake : VelocityCommand{},
                                  cfg.sim_dt_s, cfg.limits);
          }
        }
        world.step(u, cfg.sim_dt_s);
      }
      if (has_target)
        update_pairs(world.registry(), world.robots(), cfg.footprint);
      record(static_cast<int>(phase_index), u, stats);

      const bool all_conn = has_pairs && world.registry().all_connected();
      if (all_conn && out.connect_time < 0.0) out.connect_time = world.time();
      if (had_connection && world.registry().connected.empty() &&
          out.decouple_time < 0.0)
        out.decouple_time = world.time();
      had_connection = had_connection || !world.registry().connected.empty();

      if (phase.kind == PhaseKind::align && phase.stop_when_connected &&
          all_conn)
        break;
      if (phase.kind == PhaseKind::wiggle && phase.stop_when_decoupled &&
          world.registry().connected.empty())
        break;
    }
  }

  out.end_time = world.time();
  out.events = world.events();
  out.final_statuses.reserve(world.registry().pairs.size());
  for (const ConnectionPair& p : world.registry().pairs)
    out.final_statuses.push_back(p.status);
  out.all_connected = has_pairs && world.registry().all_connected();
  return out;
}

}  // namespace flexcouple
