#pragma once

// Centralized constrained MPC over the whole group.
//
// Direct simultaneous transcription: decision vector z stacks, per robot,
// the state trajectory x_0..x_H (5 each) and control trajectory u_0..u_{H-1}
// (2 each). Explicit-Euler dynamics enter as equality constraints, actuation
// boxes as linear inequalities, and — for every connected pair — the
// anchor-head containment residuals as hard linear-in-position rows over the
// first constraint_horizon steps, so no plan step may pull a seated anchor
// out of its opening region regardless of the active behavior.
//
// The NLP is solved by damped-BFGS SQP with an l1 merit line search; QP
// subproblems go to the dual active-set solver in qp.hpp. Everything is
// deterministic: same problem + same warm start => bit-identical result.

#include <Eigen/Dense>
#include <map>
#include <span>
#include <vector>

#include "flexcouple/dynamics.hpp"
#include "flexcouple/geometry.hpp"

namespace flexcouple {

// A mounting point on a robot: body-frame offset plus the connector frame's
// heading relative to the body (zero for all stock faces).
struct ConnectionPoint {
  int robot{0};
  Point2 offset;
  double frame_angle{0.0};
};

// Alignment objective term: drive point a onto point b with matched
// connector headings.
struct AlignTerm {
  ConnectionPoint a;
  ConnectionPoint b;
};

// A connected pair the plan must not break.
struct MaintainedPair {
  ConnectionPoint owner;    // anchor-owner endpoint (back-face point)
  ConnectionPoint opening;  // mated endpoint (front seat)
  Point2 head_offset;       // anchor head rest, owner body frame
  bool knob{false};         // knob/hole: coincidence box instead of triangle
  double relax{0.0};        // soft-start clearance slack, meters
};

struct CostWeights {
  double w_px{1.0}, w_py{1.0};  // alignment position error
  double w_theta{0.1};          // alignment heading error (tan^2 half-angle)
  double w_gx{1.0}, w_gy{1.0};  // goal position error
  double w_vv{1.0}, w_vw{1.0};  // velocity tracking error
  double w_final{10.0};         // terminal behavior weight
  double w_stage{1.0};          // running behavior weight
  double w_connected{0.1};      // maintenance pull toward nominal mating
  double w_smooth{0.01};        // control effort
  double w_butterfly{1e4};      // spin-without-translating penalty
  double tan_cap{1e6};

  void validate() const;  // throws std::invalid_argument
};

enum class BehaviorKind { connect, goto_goal, velocity };

struct BehaviorSpec {
  BehaviorKind kind{BehaviorKind::connect};
  std::vector<AlignTerm> align;                   // connect
  std::vector<Point2> goals;                      // goto_goal, one per robot
  std::vector<VelocityCommand> velocity_targets;  // velocity, one per robot
};

struct MpcConfig {
  int horizon{5};             // H
  int constraint_horizon{3};  // containment rows cover k = 1..this
  double dt{0.1};
  CostWeights weights;
  ActuationLimits limits;
  double epsilon{0.003};  // knob coincidence half-width, m
  double kkt_tol{1e-4};   // stationarity inf-norm
  double feas_tol{1e-6};  // constraint violation inf-norm
  int max_iterations{60};

  void validate() const;
};

// ---- per-step behavior costs (shared by the transcription and by tests) --
// `states5` stacks [px, py, theta, v, w] for each robot. Gradients are with
// respect to that stacked vector.

double connection_cost(const Eigen::VectorXd& states5,
                       std::span<const AlignTerm> terms,
                       const CostWeights& w);
void connection_cost_gradient(const Eigen::VectorXd& states5,
                              std::span<const AlignTerm> terms,
                              const CostWeights& w, Eigen::VectorXd& grad);

double goal_cost(const Eigen::VectorXd& states5,
                 std::span<const Point2> goals, const CostWeights& w);
void goal_cost_gradient(const Eigen::VectorXd& states5,
                        std::span<const Point2> goals, const CostWeights& w,
                        Eigen::VectorXd& grad);

double velocity_cost(const Eigen::VectorXd& states5,
                     std::span<const VelocityCommand> targets,
                     const CostWeights& w);
void velocity_cost_gradient(const Eigen::VectorXd& states5,
                            std::span<const VelocityCommand> targets,
                            const CostWeights& w, Eigen::VectorXd& grad);

// ---- transcription ------------------------------------------------------

class MpcProblem {
 public:
  MpcProblem(std::vector<RobotState> initial_states, BehaviorSpec behavior,
             std::vector<MaintainedPair> maintained, RobotFootprint footprint,
             MpcConfig config);

  int num_robots() const { return static_cast<int>(x0_.size()); }
  int horizon() const { return cfg_.horizon; }
  int num_variables() const { return num_robots() * per_robot_; }
  int num_equalities() const;
  int num_inequalities() const;
  // triangle-containment rows only (3 per anchor pair per constrained step)
  int num_pip_rows() const;

  int state_index(int robot, int k) const { return robot * per_robot_ + 5 * k; }
  int control_index(int robot, int k) const {
    return robot * per_robot_ + 5 * (cfg_.horizon + 1) + 2 * k;
  }

  // zero-control rollout: satisfies the dynamics rows exactly
  Eigen::VectorXd initial_guess() const;

  double cost(const Eigen::VectorXd& z) const;
  void cost_gradient(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const;
  void equalities(const Eigen::VectorXd& z, Eigen::VectorXd& c,
                  Eigen::MatrixXd* jac) const;
  void inequalities(const Eigen::VectorXd& z, Eigen::VectorXd& c,
                    Eigen::MatrixXd* jac) const;

  // raw (un-relaxed) triangle-row violation at z, 0 when all contained
  double max_pip_violation(const Eigen::VectorXd& z) const;

  const MpcConfig& config() const { return cfg_; }
  const std::vector<RobotState>& initial_states() const { return x0_; }
  const BehaviorSpec& behavior() const { return behavior_; }
  const std::vector<MaintainedPair>& maintained() const { return maintained_; }

 private:
  std::vector<RobotState> x0_;
  BehaviorSpec behavior_;
  std::vector<MaintainedPair> maintained_;
  RobotFootprint fp_;
  MpcConfig cfg_;
  int per_robot_{0};

  double behavior_step_cost(const Eigen::VectorXd& s5) const;
  void behavior_step_gradient(const Eigen::VectorXd& s5,
                              Eigen::VectorXd& grad) const;
  Eigen::VectorXd gather_step(const Eigen::VectorXd& z, int k) const;
  void scatter_step_gradient(const Eigen::VectorXd& gs, int k, double scale,
                             Eigen::VectorXd& grad) const;
};

// ---- solver -------------------------------------------------------------

struct SolveStats {
  int iterations{0};
  int qp_iterations{0};
  double kkt_residual{0.0};
  double max_equality_violation{0.0};
  double max_inequality_violation{0.0};
  double max_pip_violation{0.0};
  double cost{0.0};
  bool converged{false};
  bool qp_relaxed{false};  // an elastic QP retry was needed
  double wall_time_s{0.0};
};

struct SolveResult {
  std::vector<ControlInput> first_controls;          // per robot
  std::vector<std::vector<RobotState>> predicted;    // [robot][0..H]
  Eigen::VectorXd z;                                 // primal (warm start)
  SolveStats stats;
};

SolveResult solve_mpc(const MpcProblem& problem,
                      const Eigen::VectorXd* warm_start = nullptr);

// ---- receding-horizon driver --------------------------------------------

struct ControllerConfig {
  MpcConfig mpc;
  int softstart_solves{5};       // linear decay of entry relaxation
  double softstart_cap{0.006};   // max relaxation granted, m (2 * epsilon)
  double failsafe_decay{0.5};    // command shrink per failed solve
  int failsafe_limit{10};        // consecutive failures before giving up

  void validate() const;
};

// Owns warm starts, soft-start relaxation decay, and the fail-safe command
// hold. One instance per group; call step() once per control period.
class RecedingHorizonController {
 public:
  RecedingHorizonController(ControllerConfig config, RobotFootprint footprint,
                            int num_robots);

  std::vector<ControlInput> step(const std::vector<RobotState>& states,
                                 const BehaviorSpec& behavior,
                                 std::vector<MaintainedPair> maintained);

  const SolveStats& last_stats() const { return last_stats_; }
  const std::vector<std::vector<RobotState>>& last_prediction() const {
    return last_prediction_;
  }
  int consecutive_failures() const { return consecutive_failures_; }
  bool exhausted() const;  // fail-safe limit reached
  void reset();

 private:
  ControllerConfig cfg_;
  RobotFootprint fp_;
  int num_robots_{0};
  Eigen::VectorXd warm_;
  bool warm_valid_{false};
  std::vector<ControlInput> last_commands_;
  int consecutive_failures_{0};
  SolveStats last_stats_;
  std::vector<std::vector<RobotState>> last_prediction_;
  struct SoftStart {
    double relax0{0.0};
    int remaining{0};
  };
  std::map<std::pair<int, int>, SoftStart> softstart_;

  Eigen::VectorXd shifted_warm_start(const std::vector<RobotState>& states,
                                     const MpcProblem& problem) const;
};

}  // namespace flexcouple
