#include "flexcouple/coordination.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <tuple>

namespace flexcouple {

namespace {

constexpr double kPi = std::numbers::pi;

ConnectionPoint face_point(int robot, Face face, const RobotFootprint& fp,
                           bool mated) {
  const double normal = face_normal_angle(face);
  return {robot, fp.connection_offset(face),
          mated ? wrap_angle(normal + kPi) : normal};
}

Point2 endpoint_world(int robot, Face face,
                      std::span<const RobotState> states,
                      const RobotFootprint& fp) {
  return transform_point(states[static_cast<std::size_t>(robot)].pose(),
                         fp.connection_offset(face));
}

// Anchor head in the opening connector frame: x = depth past the face
// plane (positive inside the body), y = lateral miss off the mouth axis.
Point2 head_depth_lateral(const ConnectionPair& pr,
                          std::span<const RobotState> states,
                          const RobotFootprint& fp) {
  const Pose2 opening =
      states[static_cast<std::size_t>(pr.opening_robot())].pose();
  const Point2 head = transform_point(
      states[static_cast<std::size_t>(pr.owner_robot())].pose(),
      pr.head_offset(fp));
  const Point2 conn = transform_point(
      opening, fp.connection_offset(pr.opening_face()));
  const double n = opening.heading + face_normal_angle(pr.opening_face());
  const double cn = std::cos(n);
  const double sn = std::sin(n);
  const Point2 d = head - conn;
  return {-(d.x * cn + d.y * sn), -d.x * sn + d.y * cn};
}

// Current gap a pair still has to close: anchor head to seat, or knob to
// hole. Drives the active-pair preference order.
double pair_gap(const ConnectionPair& pr, std::span<const RobotState> states,
                const RobotFootprint& fp) {
  if (pr.type == PairType::anchor) {
    const Point2 head = transform_point(
        states[static_cast<std::size_t>(pr.owner_robot())].pose(),
        pr.head_offset(fp));
    const Point2 seat =
        endpoint_world(pr.opening_robot(), pr.opening_face(), states, fp);
    return (head - seat).norm();
  }
  const Point2 pa = endpoint_world(pr.robot_a, pr.face_a, states, fp);
  const Point2 pb = endpoint_world(pr.robot_b, pr.face_b, states, fp);
  return (pa - pb).norm();
}

}  // namespace

double face_normal_angle(Face face) {
  switch (face) {
    case Face::back:
      return kPi;
    case Face::front:
      return 0.0;
    case Face::left_knob:
    case Face::left_hole:
      return 0.5 * kPi;
    case Face::right_knob:
    case Face::right_hole:
      return -0.5 * kPi;
  }
  throw std::invalid_argument("unknown face");
}

void TargetConfig::validate() const {
  if (slots.empty()) throw std::invalid_argument("target needs slots");
  const int n = static_cast<int>(slots.size());
  for (const SlotPair& p : pairs) {
    if (p.slot_a < 0 || p.slot_a >= n || p.slot_b < 0 || p.slot_b >= n)
      throw std::invalid_argument("slot pair references a missing slot");
    if (p.slot_a == p.slot_b)
      throw std::invalid_argument("slot pair joins a slot to itself");
  }
}

std::vector<int> match_slots(const TargetConfig& target,
                             std::span<const RobotState> states) {
  target.validate();
  const std::size_t n_slots = target.slots.size();
  const std::size_t n_robots = states.size();
  if (n_slots > n_robots)
    throw std::invalid_argument("more target slots than robots");

  // the formation floats: center the slot cloud on the robot cloud so the
  // matching is about shape, not absolute placement
  Point2 slot_c, robot_c;
  for (const Pose2& s : target.slots) slot_c = slot_c + s.position;
  for (const RobotState& x : states) robot_c = robot_c + Point2{x.px, x.py};
  slot_c = slot_c * (1.0 / static_cast<double>(n_slots));
  robot_c = robot_c * (1.0 / static_cast<double>(n_robots));
  const Point2 shift = robot_c - slot_c;

  struct Edge {
    double dist;
    int slot;
    int robot;
  };
  std::vector<Edge> edges;
  edges.reserve(n_slots * n_robots);
  for (std::size_t s = 0; s < n_slots; ++s)
    for (std::size_t r = 0; r < n_robots; ++r) {
      const Point2 sp = target.slots[s].position + shift;
      edges.push_back({(sp - Point2{states[r].px, states[r].py}).norm(),
                       static_cast<int>(s), static_cast<int>(r)});
    }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.dist, a.slot, a.robot) <
           std::tie(b.dist, b.slot, b.robot);
  });

  std::vector<int> robot_of_slot(n_slots, -1);
  std::vector<bool> robot_used(n_robots, false);
  std::size_t matched = 0;
  for (const Edge& e : edges) {
    if (matched == n_slots) break;
    if (robot_of_slot[static_cast<std::size_t>(e.slot)] >= 0 ||
        robot_used[static_cast<std::size_t>(e.robot)])
      continue;
    robot_of_slot[static_cast<std::size_t>(e.slot)] = e.robot;
    robot_used[static_cast<std::size_t>(e.robot)] = true;
    ++matched;
  }
  return robot_of_slot;
}

std::vector<GoalPair> assign_connection_pairs(
    const TargetConfig& target, std::span<const RobotState> states) {
  const std::vector<int> robot_of_slot = match_slots(target, states);
  std::vector<GoalPair> goal;
  goal.reserve(target.pairs.size());
  for (const TargetConfig::SlotPair& p : target.pairs)
    goal.push_back({robot_of_slot[static_cast<std::size_t>(p.slot_a)],
                    p.face_a,
                    robot_of_slot[static_cast<std::size_t>(p.slot_b)],
                    p.face_b});
  return goal;
}

std::vector<ConnectionPair> augment_pairs(std::span<const GoalPair> goal,
                                          const RobotFootprint& fp) {
  std::vector<ConnectionPair> out;
  out.reserve(goal.size());
  for (const GoalPair& g : goal) {
    if (g.robot_a == g.robot_b)
      throw std::invalid_argument("pair joins a robot to itself");
    const Point2 oa = fp.connection_offset(g.face_a);
    const Point2 ob = fp.connection_offset(g.face_b);
    const bool a_axial = std::abs(oa.x) > std::abs(oa.y);
    const bool b_axial = std::abs(ob.x) > std::abs(ob.y);
    if (a_axial != b_axial)
      throw std::invalid_argument(
          "pair mixes a front/back endpoint with a side endpoint");

    ConnectionPair pr;
    pr.robot_a = g.robot_a;
    pr.face_a = g.face_a;
    pr.robot_b = g.robot_b;
    pr.face_b = g.face_b;
    pr.status = PairStatus::decoupled;
    if (a_axial) {  // front/back endpoints: the back face carries the anchor
      if ((oa.x < 0.0) == (ob.x < 0.0))
        throw std::invalid_argument(
            "anchor pair needs one back face and one front face");
      pr.type = PairType::anchor;
      pr.anchor_on_a = oa.x < 0.0;
    } else {  // side endpoints: exactly one protruding knob per hole
      const bool a_knob = std::abs(oa.y) > fp.half_width;
      const bool b_knob = std::abs(ob.y) > fp.half_width;
      if (a_knob == b_knob)
        throw std::invalid_argument(
            "knob pair needs one knob face and one hole face");
      pr.type = PairType::knob;
      pr.anchor_on_a = true;  // unused for knobs; keep deterministic
    }
    out.push_back(pr);
  }
  return out;
}

void PairRegistry::validate() const {
  if (epsilon <= 0.0) throw std::logic_error("epsilon must be > 0");
  const int n = static_cast<int>(pairs.size());
  std::vector<bool> in_active(pairs.size(), false);
  std::vector<int> active_uses;
  for (int idx : active) {
    if (idx < 0 || idx >= n) throw std::logic_error("active index range");
    if (in_active[static_cast<std::size_t>(idx)])
      throw std::logic_error("duplicate active index");
    in_active[static_cast<std::size_t>(idx)] = true;
    active_uses.push_back(pairs[static_cast<std::size_t>(idx)].robot_a);
    active_uses.push_back(pairs[static_cast<std::size_t>(idx)].robot_b);
  }
  std::sort(active_uses.begin(), active_uses.end());
  if (std::adjacent_find(active_uses.begin(), active_uses.end()) !=
      active_uses.end())
    throw std::logic_error("robot in two active pairs");
  std::vector<bool> in_conn(pairs.size(), false);
  for (int idx : connected) {
    if (idx < 0 || idx >= n) throw std::logic_error("connected index range");
    if (in_conn[static_cast<std::size_t>(idx)])
      throw std::logic_error("duplicate connected index");
    in_conn[static_cast<std::size_t>(idx)] = true;
    if (in_active[static_cast<std::size_t>(idx)])
      throw std::logic_error("pair both active and connected");
    if (pairs[static_cast<std::size_t>(idx)].status !=
        PairStatus::head_inserted)
      throw std::logic_error("connected pair not head_inserted");
  }
}

void mark_connected(PairRegistry& reg, int pair_index) {
  if (pair_index < 0 || pair_index >= static_cast<int>(reg.pairs.size()))
    throw std::invalid_argument("pair index out of range");
  reg.pairs[static_cast<std::size_t>(pair_index)].status =
      PairStatus::head_inserted;
  std::erase(reg.active, pair_index);
  if (std::find(reg.connected.begin(), reg.connected.end(), pair_index) ==
      reg.connected.end())
    reg.connected.push_back(pair_index);
}

void update_pairs(PairRegistry& reg, std::span<const RobotState> states,
                  const RobotFootprint& fp) {
  std::vector<int> still_active;
  still_active.reserve(reg.active.size());

  for (int idx : reg.active) {
    ConnectionPair& pr = reg.pairs[static_cast<std::size_t>(idx)];
    bool migrate = false;

    if (pr.type == PairType::anchor) {
      const Pose2 owner =
          states[static_cast<std::size_t>(pr.owner_robot())].pose();
      const Pose2 opening =
          states[static_cast<std::size_t>(pr.opening_robot())].pose();
      const Point2 head = transform_point(owner, pr.head_offset(fp));
      const ConvexPolygon mouth = opening_triangle(opening, fp);

      if (pr.status == PairStatus::decoupled) {
        if (point_in_polygon(head, mouth, reg.epsilon)) {
          pr.status = PairStatus::head_aligned;
          still_active.push_back(idx);
          continue;
        }
      }
      if (pr.status == PairStatus::head_aligned) {
        const Point2 c_owner = transform_point(
            owner, fp.connection_offset(pr.owner_face()));
        if (point_in_polygon(c_owner, footprint_polygon(opening, fp),
                             reg.epsilon)) {
          pr.status = PairStatus::head_inserted;
          still_active.push_back(idx);
          continue;
        }
        if (!point_in_polygon(head, mouth, reg.epsilon))
          pr.status = PairStatus::decoupled;
      }
      migrate = pr.status == PairStatus::head_inserted;
    } else {
      if (pr.status == PairStatus::decoupled) {
        const Point2 pa = endpoint_world(pr.robot_a, pr.face_a, states, fp);
        const Point2 pb = endpoint_world(pr.robot_b, pr.face_b, states, fp);
        if (std::max(std::abs(pa.x - pb.x), std::abs(pa.y - pb.y)) <=
            reg.epsilon) {
          pr.status = PairStatus::head_inserted;
          still_active.push_back(idx);
          continue;
        }
      }
      migrate = pr.status == PairStatus::head_inserted;
    }

    if (migrate)
      reg.connected.push_back(idx);
    else
      still_active.push_back(idx);
  }
  reg.active = std::move(still_active);
}

void assign_active_pairs(PairRegistry& reg,
                         std::span<const RobotState> states,
                         const RobotFootprint& fp) {
  std::vector<bool> is_connected(reg.pairs.size(), false);
  for (int idx : reg.connected)
    is_connected[static_cast<std::size_t>(idx)] = true;

  struct Cand {
    double gap;
    int idx;
  };
  std::vector<Cand> cands;
  for (std::size_t i = 0; i < reg.pairs.size(); ++i) {
    if (is_connected[i]) continue;
    cands.push_back(
        {pair_gap(reg.pairs[i], states, fp), static_cast<int>(i)});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    return std::tie(a.gap, a.idx) < std::tie(b.gap, b.idx);
  });

  std::vector<bool> robot_used(states.size(), false);
  std::vector<int> picked;
  for (const Cand& c : cands) {
    const ConnectionPair& pr = reg.pairs[static_cast<std::size_t>(c.idx)];
    const auto ra = static_cast<std::size_t>(pr.robot_a);
    const auto rb = static_cast<std::size_t>(pr.robot_b);
    if (robot_used[ra] || robot_used[rb]) continue;
    robot_used[ra] = true;
    robot_used[rb] = true;
    picked.push_back(c.idx);
  }
  std::sort(picked.begin(), picked.end());
  reg.active = std::move(picked);

  // First activation decides how the head will approach; the mode then
  // sticks for the pair's whole attempt (cleared again on unlink).
  for (int idx : reg.active) {
    ConnectionPair& pr = reg.pairs[static_cast<std::size_t>(idx)];
    if (pr.type != PairType::anchor || pr.entry_mode != EntryMode::unset)
      continue;
    const Point2 dl = head_depth_lateral(pr, states, fp);
    pr.entry_mode = std::abs(dl.y) > fp.mouth_halfwidth ? EntryMode::arc
                                                        : EntryMode::direct;
  }
}

std::vector<AlignTerm> align_terms(const PairRegistry& reg,
                                   std::span<const RobotState> states,
                                   const RobotFootprint& fp) {
  std::vector<AlignTerm> terms;
  terms.reserve(reg.active.size());
  for (int idx : reg.active) {
    const ConnectionPair& pr = reg.pairs[static_cast<std::size_t>(idx)];
    if (pr.type == PairType::anchor &&
        pr.status == PairStatus::decoupled) {
      // Head stage: pull the anchor head onto an aim point on the mouth
      // axis. Direct entries aim 2*epsilon inside the face so the funnel
      // takes the head; arc entries hold the aim 2*epsilon outside until
      // the head is laterally centered (or has physically entered, which
      // latches the press), keeping the face unloaded while the pair
      // swings around.
      const Point2 dl = head_depth_lateral(pr, states, fp);
      const bool press = pr.entry_mode != EntryMode::arc ||
                         std::abs(dl.y) <= 0.2 * fp.mouth_halfwidth ||
                         dl.x >= 0.5 * reg.epsilon;
      const double inset = press ? 2.0 * reg.epsilon : -2.0 * reg.epsilon;
      const double n_open = face_normal_angle(pr.opening_face());
      Point2 aim = fp.connection_offset(pr.opening_face());
      aim.x -= inset * std::cos(n_open);
      aim.y -= inset * std::sin(n_open);
      terms.push_back(
          {{pr.owner_robot(), pr.head_offset(fp),
            face_normal_angle(pr.owner_face())},
           {pr.opening_robot(), aim, wrap_angle(n_open + kPi)}});
    } else if (pr.type == PairType::anchor) {
      // Seat stage: face-to-face, with the opening point drawn inward so
      // the equilibrium keeps axial pressure on the tip past the point
      // where the faces merely touch. Without the inset the drive force
      // dies exactly at the seat barrier.
      const double n_open = face_normal_angle(pr.opening_face());
      Point2 aim = fp.connection_offset(pr.opening_face());
      aim.x -= 2.0 * reg.epsilon * std::cos(n_open);
      aim.y -= 2.0 * reg.epsilon * std::sin(n_open);
      terms.push_back(
          {face_point(pr.owner_robot(), pr.owner_face(), fp, false),
           {pr.opening_robot(), aim, wrap_angle(n_open + kPi)}});
    } else {
      terms.push_back({face_point(pr.robot_a, pr.face_a, fp, false),
                       face_point(pr.robot_b, pr.face_b, fp, true)});
    }
  }
  return terms;
}

std::vector<MaintainedPair> maintained_pairs(const PairRegistry& reg,
                                             const RobotFootprint& fp) {
  std::vector<MaintainedPair> out;
  out.reserve(reg.connected.size());
  for (int idx : reg.connected) {
    const ConnectionPair& pr = reg.pairs[static_cast<std::size_t>(idx)];
    MaintainedPair m;
    m.owner = face_point(pr.owner_robot(), pr.owner_face(), fp, false);
    m.opening = face_point(pr.opening_robot(), pr.opening_face(), fp, true);
    m.head_offset = pr.head_offset(fp);
    m.knob = pr.type == PairType::knob;
    m.relax = 0.0;  // the controller raises this on soft starts
    out.push_back(m);
  }
  return out;
}

AlignmentCoordinator::AlignmentCoordinator(TargetConfig target,
                                           const ControllerConfig& config,
                                           const RobotFootprint& fp,
                                           int num_robots)
    : target_(std::move(target)),
      footprint_(fp),
      controller_(config, fp, num_robots),
      num_robots_(num_robots) {
  target_.validate();
  fp.validate();
  if (static_cast<int>(target_.slots.size()) > num_robots)
    throw std::invalid_argument("more target slots than robots");
  registry_.epsilon = config.mpc.epsilon;
}

void AlignmentCoordinator::ensure_assigned(
    std::span<const RobotState> states) {
  if (assigned_) return;
  if (static_cast<int>(states.size()) != num_robots_)
    throw std::invalid_argument("state count mismatch");
  const std::vector<GoalPair> goal =
      assign_connection_pairs(target_, states);
  registry_.pairs = augment_pairs(goal, footprint_);
  assigned_ = true;
}

std::vector<ControlInput> AlignmentCoordinator::step(
    std::span<const RobotState> states) {
  ensure_assigned(states);
  assign_active_pairs(registry_, states, footprint_);

  BehaviorSpec behavior;
  behavior.kind = BehaviorKind::connect;
  behavior.align = align_terms(registry_, states, footprint_);

  const std::vector<RobotState> measured(states.begin(), states.end());
  std::vector<ControlInput> u = controller_.step(
      measured, behavior, maintained_pairs(registry_, footprint_));
  update_pairs(registry_, states, footprint_);
  return u;
}

}  // namespace flexcouple
