#include <algorithm>
#include <chrono>
#include <cmath>
#include <iterator>
#include <stdexcept>

#include "flexcouple/mpc.hpp"
#include "flexcouple/qp.hpp"

// SQP with damped BFGS (Powell), l1 merit line search, and an elastic QP
// retry ladder. The BFGS update keeps the Hessian model positive definite,
// which is exactly what the dual active-set QP requires.

namespace flexcouple {

namespace {

struct Evaluation {
  double f{0.0};
  Eigen::VectorXd g;
  Eigen::VectorXd cE, cI;
  Eigen::MatrixXd JE, JI;
};

void evaluate(const MpcProblem& P, const Eigen::VectorXd& z, Evaluation& ev,
              bool with_jacobians) {
  ev.f = P.cost(z);
  if (with_jacobians) {
    P.cost_gradient(z, ev.g);
    P.equalities(z, ev.cE, &ev.JE);
    P.inequalities(z, ev.cI, &ev.JI);
  } else {
    P.equalities(z, ev.cE, nullptr);
    P.inequalities(z, ev.cI, nullptr);
  }
}

double constraint_l1(const Evaluation& ev) {
  double s = ev.cE.cwiseAbs().sum();
  for (int i = 0; i < ev.cI.size(); ++i) s += std::max(0.0, ev.cI(i));
  return s;
}

double feas_inf(const Evaluation& ev) {
  double fe = ev.cE.size() ? ev.cE.cwiseAbs().maxCoeff() : 0.0;
  for (int i = 0; i < ev.cI.size(); ++i) fe = std::max(fe, ev.cI(i));
  return fe;
}

}  // namespace

SolveResult solve_mpc(const MpcProblem& P, const Eigen::VectorXd* warm_start) {
  const auto t_begin = std::chrono::steady_clock::now();
  const MpcConfig& cfg = P.config();
  const int n = P.num_variables();
  const int me = P.num_equalities();
  const int mi = P.num_inequalities();

  SolveResult out;
  Eigen::VectorXd z = (warm_start && warm_start->size() == n)
                          ? *warm_start
                          : P.initial_guess();

  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd lamE = Eigen::VectorXd::Zero(me);
  Eigen::VectorXd lamI = Eigen::VectorXd::Zero(mi);
  double mu = 10.0;

  Evaluation ev;
  evaluate(P, z, ev, true);

  Eigen::VectorXd d(n), lqE(me), lqI(mi);
  Evaluation trial;

  for (int it = 0; it < cfg.max_iterations; ++it) {
    out.stats.iterations = it;

    Eigen::VectorXd gradL = ev.g;
    gradL.noalias() += ev.JE.transpose() * lamE;
    gradL.noalias() += ev.JI.transpose() * lamI;
    const double kkt = gradL.size() ? gradL.cwiseAbs().maxCoeff() : 0.0;
    const double feasE = ev.cE.size() ? ev.cE.cwiseAbs().maxCoeff() : 0.0;
    double feasI = 0.0;
    for (int i = 0; i < mi; ++i) feasI = std::max(feasI, ev.cI(i));

    out.stats.kkt_residual = kkt;
    out.stats.max_equality_violation = feasE;
    out.stats.max_inequality_violation = feasI;
    if (kkt <= cfg.kkt_tol && feasE <= cfg.feas_tol && feasI <= cfg.feas_tol) {
      out.stats.converged = true;
      break;
    }

    // QP subproblem: min 1/2 d'Bd + g'd, JE d = -cE, JI d <= -cI.
    // Regularization ladder for LLT trouble, elastic ladder for
    // linearization-induced infeasibility (only the rhs is softened).
    QpResult qr;
    double sigma = 0.0;
    double elastic = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
      const Eigen::MatrixXd Breg =
          sigma > 0.0
              ? (B + sigma * Eigen::MatrixXd::Identity(n, n)).eval()
              : B;
      const Eigen::VectorXd bI =
          elastic > 0.0
              ? (-ev.cI.array() + elastic).matrix().eval()
              : (-ev.cI).eval();
      qr = solve_qp(Breg, ev.g, ev.JE, -ev.cE, ev.JI, bI, d, &lqE, &lqI);
      if (qr.status == QpStatus::optimal) break;
      if (qr.status == QpStatus::infeasible) {
        elastic = (elastic == 0.0) ? 1e-8 : elastic * 100.0;
        out.stats.qp_relaxed = true;
      } else {
        sigma = (sigma == 0.0) ? 1e-6 : sigma * 100.0;
      }
    }
    out.stats.qp_iterations += qr.iterations;
    if (qr.status != QpStatus::optimal) break;  // not converged: fail-safe

    const double dnorm = d.cwiseAbs().maxCoeff();
    if (dnorm < 1e-14) {
      // stationary for the model: adopt the QP multipliers and re-test
      lamE = lqE;
      lamI = lqI;
      continue;
    }

    double lam_inf = 0.0;
    if (me) lam_inf = std::max(lam_inf, lqE.cwiseAbs().maxCoeff());
    if (mi) lam_inf = std::max(lam_inf, lqI.cwiseAbs().maxCoeff());
    mu = std::max(mu, 1.5 * lam_inf + 1.0);

    const double viol0 = constraint_l1(ev);
    const double phi0 = ev.f + mu * viol0;
    const double ddir = ev.g.dot(d) - mu * viol0;

    double alpha = 1.0;
    bool accepted = false;
    Eigen::VectorXd z_try;
    for (int ls = 0; ls < 40; ++ls) {
      z_try = z + alpha * d;
      evaluate(P, z_try, trial, false);
      const double phi = trial.f + mu * constraint_l1(trial);
      if (phi <= phi0 + 1e-2 * alpha * ddir) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // merit stalled: adopt multipliers and stop; caller sees !converged
      lamE = lqE;
      lamI = lqI;
      break;
    }

    // BFGS on the Lagrangian with the incoming multipliers
    Eigen::VectorXd gradL_old = ev.g;
    gradL_old.noalias() += ev.JE.transpose() * lqE;
    gradL_old.noalias() += ev.JI.transpose() * lqI;

    const Eigen::VectorXd s = alpha * d;
    z += s;
    evaluate(P, z, ev, true);

    Eigen::VectorXd gradL_new = ev.g;
    gradL_new.noalias() += ev.JE.transpose() * lqE;
    gradL_new.noalias() += ev.JI.transpose() * lqI;

    const Eigen::VectorXd y = gradL_new - gradL_old;
    const Eigen::VectorXd Bs = B * s;
    const double sBs = s.dot(Bs);
    const double sy = s.dot(y);
    if (sBs > 1e-16) {
      // Powell damping keeps B positive definite even on negative curvature
      const double theta =
          (sy >= 0.2 * sBs) ? 1.0 : (0.8 * sBs) / (sBs - sy);
      const Eigen::VectorXd yb = theta * y + (1.0 - theta) * Bs;
      const double syb = s.dot(yb);
      if (syb > 1e-12 * sBs) {
        B.noalias() -= (Bs * Bs.transpose()) / sBs;
        B.noalias() += (yb * yb.transpose()) / syb;
      }
    }

    lamE = lqE;
    lamI = lqI;
  }

  out.z = z;
  out.stats.cost = ev.f;
  out.stats.max_pip_violation = P.max_pip_violation(z);

  const int N = P.num_robots();
  out.first_controls.resize(static_cast<std::size_t>(N));
  out.predicted.assign(static_cast<std::size_t>(N), {});
  for (int i = 0; i < N; ++i) {
    const int u0 = P.control_index(i, 0);
    out.first_controls[static_cast<std::size_t>(i)] = {z(u0), z(u0 + 1)};
    auto& traj = out.predicted[static_cast<std::size_t>(i)];
    traj.resize(static_cast<std::size_t>(cfg.horizon) + 1);
    for (int k = 0; k <= cfg.horizon; ++k) {
      const int b = P.state_index(i, k);
      traj[static_cast<std::size_t>(k)] = {z(b), z(b + 1), wrap_angle(z(b + 2)),
                                           z(b + 3), z(b + 4)};
    }
  }

  out.stats.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin)
          .count();
  return out;
}

// ---- RecedingHorizonController --------------------------------------------

void ControllerConfig::validate() const {
  mpc.validate();
  if (softstart_solves < 0)
    throw std::invalid_argument("softstart_solves must be >= 0");
  if (softstart_cap < 0.0)
    throw std::invalid_argument("softstart_cap must be >= 0");
  if (failsafe_decay < 0.0 || failsafe_decay >= 1.0)
    throw std::invalid_argument("failsafe_decay must be in [0, 1)");
  if (failsafe_limit < 1)
    throw std::invalid_argument("failsafe_limit must be >= 1");
}

RecedingHorizonController::RecedingHorizonController(ControllerConfig config,
                                                     RobotFootprint footprint,
                                                     int num_robots)
    : cfg_(config), fp_(footprint), num_robots_(num_robots) {
  cfg_.validate();
  fp_.validate();
  if (num_robots_ < 1) throw std::invalid_argument("need at least one robot");
  last_commands_.assign(static_cast<std::size_t>(num_robots_), {});
}

bool RecedingHorizonController::exhausted() const {
  return consecutive_failures_ >= cfg_.failsafe_limit;
}

void RecedingHorizonController::reset() {
  warm_valid_ = false;
  consecutive_failures_ = 0;
  softstart_.clear();
  last_commands_.assign(static_cast<std::size_t>(num_robots_), {});
  last_stats_ = {};
  last_prediction_.clear();
}

Eigen::VectorXd RecedingHorizonController::shifted_warm_start(
    const std::vector<RobotState>& states, const MpcProblem& P) const {
  // shift the previous plan one period, extend the tail by integrating the
  // repeated last control (keeps every dynamics row except k=0 satisfied),
  // and pin the measured state at k=0
  const int H = cfg_.mpc.horizon;
  const double dt = cfg_.mpc.dt;
  Eigen::VectorXd z = warm_;
  for (int i = 0; i < num_robots_; ++i) {
    for (int k = 0; k < H; ++k) {
      const int src = P.state_index(i, k + 1);
      z.segment<5>(P.state_index(i, k)) = warm_.segment<5>(src);
    }
    for (int k = 0; k < H; ++k) {
      const int src = P.control_index(i, std::min(k + 1, H - 1));
      z.segment<2>(P.control_index(i, k)) = warm_.segment<2>(src);
    }
    const int tail = P.state_index(i, H);
    const int prev = P.state_index(i, H - 1);
    const int u_tail = P.control_index(i, H - 1);
    const double th = z(prev + 2), v = z(prev + 3), w = z(prev + 4);
    z(tail) = z(prev) + dt * v * std::cos(th);
    z(tail + 1) = z(prev + 1) + dt * v * std::sin(th);
    z(tail + 2) = th + dt * w;
    z(tail + 3) = v + dt * z(u_tail);
    z(tail + 4) = w + dt * z(u_tail + 1);
    const auto& s = states[static_cast<std::size_t>(i)];
    const int b = P.state_index(i, 0);
    // keep the plan's heading on the same winding branch as the measurement
    const double th_plan = z(b + 2);
    const double th_meas =
        th_plan + wrap_angle(s.theta - wrap_angle(th_plan));
    z(b) = s.px;
    z(b + 1) = s.py;
    z(b + 2) = th_meas;
    z(b + 3) = s.v;
    z(b + 4) = s.w;
  }
  return z;
}

std::vector<ControlInput> RecedingHorizonController::step(
    const std::vector<RobotState>& states, const BehaviorSpec& behavior,
    std::vector<MaintainedPair> maintained) {
  if (static_cast<int>(states.size()) != num_robots_)
    throw std::invalid_argument("state count mismatch");

  // soft-start: newly connected pairs may begin slightly outside their
  // containment region (status noise); grant the measured violation as a
  // decaying slack instead of handing the solver an infeasible start
  for (auto& p : maintained) {
    const auto key = std::make_pair(p.owner.robot, p.opening.robot);
    auto it = softstart_.find(key);
    if (it == softstart_.end()) {
      const auto& so = states[static_cast<std::size_t>(p.owner.robot)];
      const auto& sp = states[static_cast<std::size_t>(p.opening.robot)];
      double clearance = 0.0;  // meters the pair currently sticks out
      if (p.knob) {
        const Point2 a = transform_point(
            so.pose(), p.owner.offset);
        const Point2 b = transform_point(sp.pose(), p.opening.offset);
        clearance = std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)) -
                    cfg_.mpc.epsilon;
      } else {
        const Point2 head = transform_point(so.pose(), p.head_offset);
        const ConvexPolygon tri = opening_triangle(sp.pose(), fp_);
        const auto res = pip_residuals(head, tri);
        const auto& vv = tri.vertices();
        for (std::size_t e = 0; e < vv.size(); ++e) {
          const double elen = (vv[(e + 1) % vv.size()] - vv[e]).norm();
          clearance = std::max(clearance, res[e] / elen);
        }
      }
      SoftStart ss;
      ss.relax0 = std::clamp(clearance, 0.0, cfg_.softstart_cap);
      ss.remaining = ss.relax0 > 0.0 ? cfg_.softstart_solves : 0;
      it = softstart_.emplace(key, ss).first;
    }
    if (it->second.remaining > 0) {
      p.relax = it->second.relax0 * static_cast<double>(it->second.remaining) /
                static_cast<double>(std::max(1, cfg_.softstart_solves));
      --it->second.remaining;
    }
  }
  // forget soft-start entries for pairs that vanished
  for (auto it = softstart_.begin(); it != softstart_.end();) {
    const bool present =
        std::any_of(maintained.begin(), maintained.end(), [&](const auto& p) {
          return std::make_pair(p.owner.robot, p.opening.robot) == it->first;
        });
    it = present ? std::next(it) : softstart_.erase(it);
  }

  MpcProblem problem(states, behavior, std::move(maintained), fp_, cfg_.mpc);

  Eigen::VectorXd warm;
  const Eigen::VectorXd* warm_ptr = nullptr;
  if (warm_valid_ && warm_.size() == problem.num_variables()) {
    warm = shifted_warm_start(states, problem);
    warm_ptr = &warm;
  }

  SolveResult res = solve_mpc(problem, warm_ptr);
  last_stats_ = res.stats;

  if (res.stats.converged) {
    consecutive_failures_ = 0;
    warm_ = res.z;
    warm_valid_ = true;
    last_commands_ = res.first_controls;
    last_prediction_ = res.predicted;
    return res.first_controls;
  }

  // fail-safe: hold the previous command, decayed toward zero
  ++consecutive_failures_;
  warm_valid_ = false;
  for (auto& u : last_commands_) {
    u.vdot *= cfg_.failsafe_decay;
    u.wdot *= cfg_.failsafe_decay;
  }
  return last_commands_;
}

}  // namespace flexcouple
