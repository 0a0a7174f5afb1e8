#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "flexcouple/coordination.hpp"

using namespace flexcouple;

namespace {

const RobotFootprint kFp;

// line of `n` slots along +x at the nominal coupled spacing, chained
// back-to-front (slot 0 leads)
TargetConfig line_target(int n) {
  TargetConfig t;
  const double spacing = 2.0 * kFp.half_depth - kFp.seat_recess;  // 0.045
  for (int i = 0; i < n; ++i)
    t.slots.push_back({{-spacing * i, 0.0}, 0.0});
  for (int i = 0; i + 1 < n; ++i)
    t.pairs.push_back({i, Face::back, i + 1, Face::front});
  return t;
}

RobotState at(double px, double py, double theta = 0.0) {
  return {px, py, theta, 0.0, 0.0};
}

}  // namespace

TEST_CASE("slot matching is nearest-first and identity on exact placement") {
  const TargetConfig t = line_target(2);

  // robots already sitting in the slots: identity matching
  std::vector<RobotState> exact{at(0, 0), at(-0.045, 0)};
  CHECK(match_slots(t, exact) == std::vector<int>{0, 1});

  // swapped robots: matching crosses over
  std::vector<RobotState> swapped{at(-0.045, 0), at(0, 0)};
  CHECK(match_slots(t, swapped) == std::vector<int>{1, 0});

  // matching is translation-invariant (slot cloud centers on the robots)
  std::vector<RobotState> shifted{at(3.0, 2.0), at(3.0 - 0.045, 2.0)};
  CHECK(match_slots(t, shifted) == std::vector<int>{0, 1});

  // more slots than robots is a config error
  std::vector<RobotState> lone{at(0, 0)};
  CHECK_THROWS_AS(match_slots(t, lone), std::invalid_argument);

  // extra robots stay unmatched (the far one is never the nearest pick)
  std::vector<RobotState> three{at(0, 0), at(-0.045, 0), at(5, 5)};
  const auto partial = match_slots(t, three);
  REQUIRE(partial.size() == 2);
  CHECK(partial[0] != partial[1]);
  CHECK(partial[0] != 2);
  CHECK(partial[1] != 2);

  TargetConfig bad = t;
  bad.pairs.push_back({0, Face::back, 0, Face::front});
  CHECK_THROWS_AS(match_slots(bad, exact), std::invalid_argument);
}

TEST_CASE("goal pair generation follows the slot pairs") {
  CHECK(assign_connection_pairs(line_target(2),
                                std::vector<RobotState>{at(0, 0),
                                                        at(-0.045, 0)})
            .size() == 1);

  // 4-robot line: 3 pairs, chain topology over matched robots
  std::vector<RobotState> four{at(0, 0), at(-0.045, 0), at(-0.09, 0),
                               at(-0.135, 0)};
  const auto goal = assign_connection_pairs(line_target(4), four);
  REQUIRE(goal.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(goal[static_cast<std::size_t>(i)].robot_a == i);
    CHECK(goal[static_cast<std::size_t>(i)].robot_b == i + 1);
  }
}

TEST_CASE("augmentation classifies pairs and rejects nonsense") {
  // back-to-front: anchor on the back-face endpoint, head one anchor
  // length behind the connection point
  const GoalPair bf{0, Face::back, 1, Face::front};
  auto pairs = augment_pairs(std::vector<GoalPair>{bf}, kFp);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].type == PairType::anchor);
  CHECK(pairs[0].status == PairStatus::decoupled);
  CHECK(pairs[0].owner_robot() == 0);
  CHECK(pairs[0].opening_robot() == 1);
  CHECK(pairs[0].head_offset(kFp).x == doctest::Approx(-0.04));
  CHECK(pairs[0].head_offset(kFp).y == 0.0);

  // front-to-back flips ownership
  const GoalPair fb{0, Face::front, 1, Face::back};
  CHECK(augment_pairs(std::vector<GoalPair>{fb}, kFp)[0].owner_robot() == 1);

  // side-to-side: knob type, no anchor semantics
  const GoalPair knob{0, Face::left_knob, 1, Face::right_hole};
  CHECK(augment_pairs(std::vector<GoalPair>{knob}, kFp)[0].type ==
        PairType::knob);

  // rejected combinations
  CHECK_THROWS_AS(
      augment_pairs(std::vector<GoalPair>{{0, Face::back, 1, Face::back}},
                    kFp),
      std::invalid_argument);
  CHECK_THROWS_AS(
      augment_pairs(
          std::vector<GoalPair>{{0, Face::back, 1, Face::left_knob}}, kFp),
      std::invalid_argument);
  CHECK_THROWS_AS(
      augment_pairs(
          std::vector<GoalPair>{{0, Face::left_knob, 1, Face::left_knob}},
          kFp),
      std::invalid_argument);
  CHECK_THROWS_AS(
      augment_pairs(std::vector<GoalPair>{{2, Face::back, 2, Face::front}},
                    kFp),
      std::invalid_argument);
}

TEST_CASE("status updates walk the lifecycle from live geometry") {
  PairRegistry reg;
  reg.pairs = augment_pairs(
      std::vector<GoalPair>{{0, Face::back, 1, Face::front}}, kFp);
  reg.active = {0};

  // far apart: nothing changes
  std::vector<RobotState> states{at(0, 0), at(-0.2, 0)};
  update_pairs(reg, states, kFp);
  CHECK(reg.pairs[0].status == PairStatus::decoupled);
  reg.validate();

  // head 5 mm past the mouth plane: aligned (and only aligned this call)
  states[1] = at(-0.060, 0);
  update_pairs(reg, states, kFp);
  CHECK(reg.pairs[0].status == PairStatus::head_aligned);
  CHECK(reg.active == std::vector<int>{0});
  CHECK(reg.connected.empty());

  // still aligned, connection point not yet 3 mm deep: no insertion
  states[1] = at(-0.049, 0);
  update_pairs(reg, states, kFp);
  CHECK(reg.pairs[0].status == PairStatus::head_aligned);

  // nominal coupled separation: inserted, but migration waits one call
  states[1] = at(-0.045, 0);
  update_pairs(reg, states, kFp);
  CHECK(reg.pairs[0].status == PairStatus::head_inserted);
  CHECK(reg.active == std::vector<int>{0});
  CHECK(reg.connected.empty());
  update_pairs(reg, states, kFp);
  CHECK(reg.active.empty());
  CHECK(reg.connected == std::vector<int>{0});
  CHECK(reg.all_connected());
  reg.validate();
}

TEST_CASE("head_aligned regresses to decoupled when the head slips out") {
  PairRegistry reg;
  reg.pairs = augment_pairs(
      std::vector<GoalPair>{{0, Face::back, 1, Face::front}}, kFp);
  reg.active = {0};

  std::vector<RobotState> states{at(0, 0), at(-0.060, 0)};
  update_pairs(reg, states, kFp);
  REQUIRE(reg.pairs[0].status == PairStatus::head_aligned);

  states[1] = at(-0.2, 0);  // yanked away
  update_pairs(reg, states, kFp);
  CHECK(reg.pairs[0].status == PairStatus::decoupled);
  CHECK(reg.active == std::vector<int>{0});
  CHECK(reg.connected.empty());
}

TEST_CASE("knob pairs connect on point coincidence") {
  PairRegistry reg;
  reg.pairs = augment_pairs(
      std::vector<GoalPair>{{0, Face::right_knob, 1, Face::left_hole}}, kFp);
  reg.active = {0};

  // side-by-side with faces touching: the protruding knob tip reaches the
  // recessed hole seat exactly at two half-widths of center spacing
  const double lateral = 2.0 * kFp.half_width;  // 0.050
  std::vector<RobotState> states{at(0, 0), at(0, -lateral)};
  update_pairs(reg, states, kFp);
  CHECK(reg.pairs[0].status == PairStatus::head_inserted);
  update_pairs(reg, states, kFp);
  CHECK(reg.connected == std::vector<int>{0});

  // a fresh pair too far laterally stays decoupled
  PairRegistry reg2;
  reg2.pairs = reg.pairs;
  reg2.pairs[0].status = PairStatus::decoupled;
  reg2.active = {0};
  std::vector<RobotState> apart{at(0, 0), at(0, -lateral - 0.01)};
  update_pairs(reg2, apart, kFp);
  CHECK(reg2.pairs[0].status == PairStatus::decoupled);
}

TEST_CASE("active-pair scheduling is robot-disjoint and distance-greedy") {
  // 3 robots chained: the two pairs share robot 1, so only one activates;
  // the nearer coupling wins
  PairRegistry reg;
  reg.pairs = augment_pairs(
      std::vector<GoalPair>{{0, Face::back, 1, Face::front},
                            {1, Face::back, 2, Face::front}},
      kFp);
  std::vector<RobotState> states{at(0, 0), at(-0.3, 0), at(-0.4, 0)};
  assign_active_pairs(reg, states, kFp);
  CHECK(reg.active == std::vector<int>{1});  // pair 1 gap 0.04 < pair 0 gap
  reg.validate();

  // once pair 1 is connected, robot 1 stays eligible and pair 0 activates
  mark_connected(reg, 1);
  assign_active_pairs(reg, states, kFp);
  CHECK(reg.active == std::vector<int>{0});
  reg.validate();

  // disjoint pairs both activate
  PairRegistry reg2;
  reg2.pairs = augment_pairs(
      std::vector<GoalPair>{{0, Face::back, 1, Face::front},
                            {2, Face::back, 3, Face::front}},
      kFp);
  std::vector<RobotState> four{at(0, 0), at(-0.1, 0), at(1, 0),
                               at(0.9, 0)};
  assign_active_pairs(reg2, four, kFp);
  CHECK(reg2.active == std::vector<int>{0, 1});
  reg2.validate();

  // empty goal list: empty active list
  PairRegistry reg3;
  assign_active_pairs(reg3, four, kFp);
  CHECK(reg3.active.empty());
}

TEST_CASE("mpc term composition anti-aligns the mated connector frames") {
  PairRegistry reg;
  reg.pairs = augment_pairs(
      std::vector<GoalPair>{{0, Face::back, 1, Face::front}}, kFp);
  reg.active = {0};
  const std::vector<RobotState> pair_states{at(0, 0), at(-0.065, 0)};
  const auto terms = align_terms(reg, pair_states, kFp);
  REQUIRE(terms.size() == 1);
  // coupled-and-aligned headings must read as zero frame error
  const double mated_err = wrap_angle(
      (0.0 + terms[0].a.frame_angle) - (0.0 + terms[0].b.frame_angle));
  CHECK(mated_err == doctest::Approx(0.0).epsilon(1e-12));

  mark_connected(reg, 0);
  const auto maintained = maintained_pairs(reg, kFp);
  REQUIRE(maintained.size() == 1);
  CHECK(maintained[0].owner.robot == 0);
  CHECK(maintained[0].opening.robot == 1);
  CHECK_FALSE(maintained[0].knob);
  CHECK(maintained[0].head_offset.x == doctest::Approx(-0.04));
  CHECK(maintained[0].relax == 0.0);
  CHECK(wrap_angle(maintained[0].owner.frame_angle -
                   maintained[0].opening.frame_angle) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("alignment loop couples two robots from the standard start") {
  ControllerConfig cfg;
  AlignmentCoordinator coord(line_target(2), cfg, kFp, 2);

  // owner ahead, follower one full anchor-plus-body length behind: the
  // anchor head exactly at the follower's mouth plane
  std::vector<RobotState> states{at(0, 0), at(-0.065, 0)};

  int steps = 0;
  const int max_steps = 600;  // 60 s at the 0.1 s control period
  while (!coord.registry().all_connected() && steps < max_steps) {
    const std::vector<ControlInput> u = coord.step(states);
    REQUIRE(u.size() == 2);
    REQUIRE(coord.controller().last_stats().converged);
    for (std::size_t i = 0; i < states.size(); ++i)
      states[i] = euler_step(states[i], u[i], cfg.mpc.dt);
    coord.registry().validate();
    ++steps;
  }
  CHECK(coord.registry().all_connected());
  CHECK(steps < max_steps);

  // with everything connected the loop degenerates to maintenance and the
  // commanded motion dies out
  for (int k = 0; k < 10; ++k) {
    const auto u = coord.step(states);
    for (std::size_t i = 0; i < states.size(); ++i)
      states[i] = euler_step(states[i], u[i], cfg.mpc.dt);
  }
  CHECK(std::abs(states[0].v) < 5e-3);
  CHECK(std::abs(states[1].v) < 5e-3);

  // and the connected pair's containment stays satisfied at the plan
  CHECK(coord.controller().last_stats().max_pip_violation <= 1e-6);
}
