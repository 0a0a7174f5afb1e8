#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cstring>

#include "flexcouple/mpc.hpp"
#include "flexcouple/rng.hpp"

using namespace flexcouple;

namespace {

Eigen::VectorXd random_states5(UniformRng& rng, int n_robots) {
  Eigen::VectorXd s(5 * n_robots);
  for (int i = 0; i < n_robots; ++i) {
    s(5 * i) = rng.range(-1.0, 1.0);
    s(5 * i + 1) = rng.range(-1.0, 1.0);
    s(5 * i + 2) = rng.range(-1.5, 1.5);
    s(5 * i + 3) = rng.range(-0.05, 0.05);
    s(5 * i + 4) = rng.range(-2.0, 2.0);
  }
  return s;
}

// scaled inf-norm relative error of an analytic gradient vs central FD
template <typename F>
double gradcheck(const F& f, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& grad) {
  Eigen::VectorXd fd(x.size());
  Eigen::VectorXd xp = x;
  for (int j = 0; j < x.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(j)));
    xp(j) = x(j) + h;
    const double fp = f(xp);
    xp(j) = x(j) - h;
    const double fm = f(xp);
    xp(j) = x(j);
    fd(j) = (fp - fm) / (2.0 * h);
  }
  const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
  return (grad - fd).cwiseAbs().maxCoeff() / scale;
}

MpcConfig small_config(int horizon = 3, int hc = 3) {
  MpcConfig cfg;
  cfg.horizon = horizon;
  cfg.constraint_horizon = hc;
  return cfg;
}

RobotFootprint fp() { return {}; }

MaintainedPair nominal_pair() {
  MaintainedPair p;
  p.owner = {0, fp().connection_offset(Face::back), 0.0};
  p.opening = {1, fp().connection_offset(Face::front), 0.0};
  p.head_offset = fp().anchor_head_offset();
  return p;
}

// two robots in the nominal coupled arrangement, owner in front
std::vector<RobotState> coupled_states() {
  return {{0.0, 0.0, 0.0, 0.0, 0.0}, {-0.045, 0.0, 0.0, 0.0, 0.0}};
}

}  // namespace

TEST_CASE("behavior cost gradients match finite differences") {
  UniformRng rng(101);
  CostWeights w;
  const RobotFootprint f = fp();
  std::vector<AlignTerm> terms = {
      {{0, f.connection_offset(Face::back), 0.0},
       {1, f.connection_offset(Face::front), 0.0}},
      {{2, f.connection_offset(Face::left_knob), 0.0},
       {1, f.connection_offset(Face::right_hole), 0.0}},
  };
  std::vector<Point2> goals = {{0.3, -0.2}, {-0.1, 0.4}, {0.0, 0.0}};
  std::vector<VelocityCommand> targets = {{0.03, 0.1}, {-0.02, 0.5}, {0.0, 0.0}};

  double worst_c = 0.0, worst_g = 0.0, worst_v = 0.0;
  Eigen::VectorXd grad;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd s = random_states5(rng, 3);
    connection_cost_gradient(s, terms, w, grad);
    worst_c = std::max(
        worst_c, gradcheck([&](const Eigen::VectorXd& x) {
          return connection_cost(x, terms, w);
        }, s, grad));
    goal_cost_gradient(s, goals, w, grad);
    worst_g = std::max(
        worst_g, gradcheck([&](const Eigen::VectorXd& x) {
          return goal_cost(x, goals, w);
        }, s, grad));
    velocity_cost_gradient(s, targets, w, grad);
    worst_v = std::max(
        worst_v, gradcheck([&](const Eigen::VectorXd& x) {
          return velocity_cost(x, targets, w);
        }, s, grad));
  }
  CHECK(worst_c < 1e-4);
  CHECK(worst_g < 1e-4);
  CHECK(worst_v < 1e-4);
}

TEST_CASE("transcription sizes") {
  SUBCASE("single robot, short horizon") {
    BehaviorSpec b;
    b.kind = BehaviorKind::goto_goal;
    b.goals = {{1.0, 0.0}};
    MpcProblem p({{0, 0, 0, 0, 0}}, b, {}, fp(), small_config(3));
    CHECK(p.num_variables() == 26);  // 5*4 states + 2*3 controls
    CHECK(p.num_equalities() == 20);
    CHECK(p.num_pip_rows() == 0);
  }
  SUBCASE("pair under maintenance") {
    BehaviorSpec b;  // connect with no remaining alignment terms
    MpcProblem p(coupled_states(), b, {nominal_pair()}, fp(),
                 small_config(5, 3));
    CHECK(p.num_pip_rows() == 9);  // 3 rows x H_c
    CHECK(p.num_inequalities() == 8 * 2 * 5 + 9);
  }
}

TEST_CASE("problem cost gradient and constraint jacobians match FD") {
  UniformRng rng(202);
  BehaviorSpec b;
  b.kind = BehaviorKind::connect;
  const RobotFootprint f = fp();
  b.align = {{{0, f.connection_offset(Face::back), 0.0},
              {1, f.connection_offset(Face::front), 0.0}}};
  MaintainedPair knob;
  knob.owner = {0, f.connection_offset(Face::left_knob), 0.0};
  knob.opening = {1, f.connection_offset(Face::right_hole), 0.0};
  knob.head_offset = {0, 0};
  knob.knob = true;
  knob.relax = 0.002;
  auto anchor = nominal_pair();
  anchor.relax = 0.001;
  MpcProblem p(coupled_states(), b, {anchor, knob}, f, small_config(3, 2));

  Eigen::VectorXd z = p.initial_guess();
  for (int j = 0; j < z.size(); ++j) z(j) += rng.range(-0.02, 0.02);

  SUBCASE("cost gradient") {
    Eigen::VectorXd grad;
    p.cost_gradient(z, grad);
    const double err = gradcheck(
        [&](const Eigen::VectorXd& x) { return p.cost(x); }, z, grad);
    CHECK(err < 1e-4);
  }

  SUBCASE("equality jacobian") {
    Eigen::VectorXd c;
    Eigen::MatrixXd J;
    p.equalities(z, c, &J);
    Eigen::VectorXd cp, cm;
    Eigen::VectorXd zp = z;
    double worst = 0.0;
    for (int j = 0; j < z.size(); ++j) {
      const double h = 1e-6;
      zp(j) = z(j) + h;
      p.equalities(zp, cp, nullptr);
      zp(j) = z(j) - h;
      p.equalities(zp, cm, nullptr);
      zp(j) = z(j);
      worst = std::max(
          worst, (J.col(j) - (cp - cm) / (2 * h)).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-6);
  }

  SUBCASE("inequality jacobian") {
    Eigen::VectorXd c;
    Eigen::MatrixXd J;
    p.inequalities(z, c, &J);
    Eigen::VectorXd cp, cm;
    Eigen::VectorXd zp = z;
    double worst = 0.0;
    for (int j = 0; j < z.size(); ++j) {
      const double h = 1e-6;
      zp(j) = z(j) + h;
      p.inequalities(zp, cp, nullptr);
      zp(j) = z(j) - h;
      p.inequalities(zp, cm, nullptr);
      zp(j) = z(j);
      worst = std::max(
          worst, (J.col(j) - (cp - cm) / (2 * h)).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("goto goal straight ahead accelerates forward") {
  BehaviorSpec b;
  b.kind = BehaviorKind::goto_goal;
  b.goals = {{0.5, 0.0}};
  MpcProblem p({{0, 0, 0, 0, 0}}, b, {}, fp(), small_config(5));
  const auto res = solve_mpc(p);
  REQUIRE(res.stats.converged);
  CHECK(res.first_controls[0].vdot > 0.0);
  CHECK(res.stats.max_equality_violation <= 1e-6);
  CHECK(res.stats.max_inequality_violation <= 1e-6);
  // the plan respects the velocity box
  for (const auto& s : res.predicted[0]) {
    CHECK(std::abs(s.v) <= 0.05 + 1e-9);
    CHECK(std::abs(s.w) <= 2.0 + 1e-9);
  }
}

TEST_CASE("pure smoothness objective keeps controls at zero") {
  MpcConfig cfg = small_config(4);
  cfg.weights = CostWeights{};
  cfg.weights.w_final = 0.0;
  cfg.weights.w_stage = 0.0;
  cfg.weights.w_connected = 0.0;
  cfg.weights.w_butterfly = 0.0;
  cfg.weights.w_smooth = 0.01;
  BehaviorSpec b;
  b.kind = BehaviorKind::goto_goal;
  b.goals = {{1.0, 1.0}};  // irrelevant: its weights are zero
  MpcProblem p({{0, 0, 0, 0.01, 0}}, b, {}, fp(), cfg);
  const auto res = solve_mpc(p);
  REQUIRE(res.stats.converged);
  for (int k = 0; k < cfg.horizon; ++k) {
    CHECK(std::abs(res.z(p.control_index(0, k))) < 1e-6);
    CHECK(std::abs(res.z(p.control_index(0, k) + 1)) < 1e-6);
  }
}

TEST_CASE("maintained pair stays contained while driving") {
  BehaviorSpec b;
  b.kind = BehaviorKind::velocity;
  b.velocity_targets = {{0.025, 0.0}, {0.025, 0.0}};
  MpcProblem p(coupled_states(), b, {nominal_pair()}, fp(), small_config(5, 3));
  const auto res = solve_mpc(p);
  REQUIRE(res.stats.converged);
  CHECK(res.stats.max_pip_violation <= 1e-6);
  CHECK(res.stats.max_equality_violation <= 1e-6);
  // and it actually moves
  CHECK(res.predicted[0].back().v > 0.01);
}

TEST_CASE("identical problem and warm start solve bit-identically") {
  BehaviorSpec b;
  b.kind = BehaviorKind::velocity;
  b.velocity_targets = {{0.02, 0.0}, {0.02, 0.0}};
  MpcProblem p(coupled_states(), b, {nominal_pair()}, fp(), small_config(5, 3));
  const auto r1 = solve_mpc(p);
  const auto r2 = solve_mpc(p);
  REQUIRE(r1.stats.converged);
  CHECK(r1.stats.iterations == r2.stats.iterations);
  CHECK(std::memcmp(r1.z.data(), r2.z.data(),
                    sizeof(double) * static_cast<std::size_t>(r1.z.size())) ==
        0);
  const auto r3 = solve_mpc(p, &r1.z);
  const auto r4 = solve_mpc(p, &r1.z);
  CHECK(std::memcmp(r3.z.data(), r4.z.data(),
                    sizeof(double) * static_cast<std::size_t>(r3.z.size())) ==
        0);
}

TEST_CASE("warm-started receding horizon needs no more iterations than cold") {
  ControllerConfig cc;
  cc.mpc = small_config(5, 3);
  RecedingHorizonController ctrl(cc, fp(), 1);
  BehaviorSpec b;
  b.kind = BehaviorKind::goto_goal;
  b.goals = {{0.4, 0.1}};

  std::vector<RobotState> states = {{0, 0, 0, 0, 0}};
  std::vector<int> warm_iters, cold_iters;
  for (int step = 0; step < 50; ++step) {
    const auto u = ctrl.step(states, b, {});
    REQUIRE(ctrl.last_stats().converged);
    warm_iters.push_back(ctrl.last_stats().iterations);
    MpcProblem p(states, b, {}, fp(), cc.mpc);
    cold_iters.push_back(solve_mpc(p).stats.iterations);
    states[0] = euler_step(states[0], u[0], cc.mpc.dt);
  }
  auto median = [](std::vector<int> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  CHECK(median(warm_iters) <= median(cold_iters));
}

TEST_CASE("fail-safe decays the last command and reports exhaustion") {
  ControllerConfig cc;
  cc.mpc = small_config(5, 3);
  cc.failsafe_limit = 3;
  RecedingHorizonController ctrl(cc, fp(), 1);
  BehaviorSpec b;
  b.kind = BehaviorKind::goto_goal;
  b.goals = {{0.3, 0.0}};
  std::vector<RobotState> states = {{0, 0, 0, 0, 0}};
  const auto u_good = ctrl.step(states, b, {});
  REQUIRE(ctrl.last_stats().converged);
  REQUIRE(u_good[0].vdot > 0.0);

  // now make convergence impossible
  ControllerConfig bad = cc;
  bad.mpc.max_iterations = 1;
  bad.mpc.kkt_tol = 1e-16;
  RecedingHorizonController ctrl2(bad, fp(), 1);
  const auto u1 = ctrl2.step(states, b, {});
  CHECK_FALSE(ctrl2.last_stats().converged);
  CHECK(u1[0].vdot == 0.0);  // nothing to hold yet
  const auto u2 = ctrl2.step(states, b, {});
  CHECK(u2[0].vdot == 0.0);
  CHECK(ctrl2.consecutive_failures() == 2);
  ctrl2.step(states, b, {});
  CHECK(ctrl2.exhausted());
}
