#include "flexcouple/mpc.hpp"

#include <cmath>
#include <stdexcept>

namespace flexcouple {

namespace {

// derivative of the rotated offset with respect to the heading
Point2 rot_deriv(double theta, const Point2& off) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {-s * off.x - c * off.y, c * off.x - s * off.y};
}

Point2 world_point(const Eigen::VectorXd& s5, const ConnectionPoint& cp) {
  const double px = s5(5 * cp.robot), py = s5(5 * cp.robot + 1);
  const double th = s5(5 * cp.robot + 2);
  const double c = std::cos(th), s = std::sin(th);
  return {px + c * cp.offset.x - s * cp.offset.y,
          py + s * cp.offset.x + c * cp.offset.y};
}

}  // namespace

void CostWeights::validate() const {
  const double all[] = {w_px, w_py, w_theta, w_gx,        w_gy,
                        w_vv, w_vw, w_final, w_stage,     w_connected,
                        w_smooth,   w_butterfly, tan_cap};
  for (const double v : all)
    if (!(v >= 0.0)) throw std::invalid_argument("cost weights must be >= 0");
  if (tan_cap <= 0.0) throw std::invalid_argument("tan_cap must be > 0");
}

void MpcConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (constraint_horizon < 0 || constraint_horizon > horizon)
    throw std::invalid_argument("constraint_horizon must be in [0, horizon]");
  if (dt <= 0.0) throw std::invalid_argument("dt must be > 0");
  if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be > 0");
  if (kkt_tol <= 0.0 || feas_tol <= 0.0)
    throw std::invalid_argument("tolerances must be > 0");
  if (max_iterations < 1)
    throw std::invalid_argument("max_iterations must be >= 1");
  weights.validate();
  limits.validate();
}

// ---- per-step behavior costs ---------------------------------------------

double connection_cost(const Eigen::VectorXd& states5,
                       std::span<const AlignTerm> terms, const CostWeights& w) {
  double total = 0.0;
  for (const AlignTerm& t : terms) {
    const Point2 pa = world_point(states5, t.a);
    const Point2 pb = world_point(states5, t.b);
    const Point2 d = pa - pb;
    const double dth = (states5(5 * t.a.robot + 2) + t.a.frame_angle) -
                       (states5(5 * t.b.robot + 2) + t.b.frame_angle);
    total += w.w_px * d.x * d.x + w.w_py * d.y * d.y +
             w.w_theta * wrap_angle_cost(dth, w.tan_cap);
  }
  return total;
}

void connection_cost_gradient(const Eigen::VectorXd& states5,
                              std::span<const AlignTerm> terms,
                              const CostWeights& w, Eigen::VectorXd& grad) {
  grad.setZero(states5.size());
  for (const AlignTerm& t : terms) {
    const Point2 pa = world_point(states5, t.a);
    const Point2 pb = world_point(states5, t.b);
    const Point2 d = pa - pb;
    const double gx = 2.0 * w.w_px * d.x;
    const double gy = 2.0 * w.w_py * d.y;
    const double tha = states5(5 * t.a.robot + 2);
    const double thb = states5(5 * t.b.robot + 2);
    const double dth = (tha + t.a.frame_angle) - (thb + t.b.frame_angle);
    const double gth = w.w_theta * wrap_angle_cost_derivative(dth, w.tan_cap);

    const Point2 da = rot_deriv(tha, t.a.offset);
    const Point2 db = rot_deriv(thb, t.b.offset);
    grad(5 * t.a.robot) += gx;
    grad(5 * t.a.robot + 1) += gy;
    grad(5 * t.a.robot + 2) += gx * da.x + gy * da.y + gth;
    grad(5 * t.b.robot) -= gx;
    grad(5 * t.b.robot + 1) -= gy;
    grad(5 * t.b.robot + 2) -= gx * db.x + gy * db.y + gth;
  }
}

double goal_cost(const Eigen::VectorXd& states5, std::span<const Point2> goals,
                 const CostWeights& w) {
  double total = 0.0;
  for (std::size_t i = 0; i < goals.size(); ++i) {
    const double ex = states5(5 * static_cast<int>(i)) - goals[i].x;
    const double ey = states5(5 * static_cast<int>(i) + 1) - goals[i].y;
    total += w.w_gx * ex * ex + w.w_gy * ey * ey;
  }
  return total;
}

void goal_cost_gradient(const Eigen::VectorXd& states5,
                        std::span<const Point2> goals, const CostWeights& w,
                        Eigen::VectorXd& grad) {
  grad.setZero(states5.size());
  for (std::size_t i = 0; i < goals.size(); ++i) {
    const int b = 5 * static_cast<int>(i);
    grad(b) = 2.0 * w.w_gx * (states5(b) - goals[i].x);
    grad(b + 1) = 2.0 * w.w_gy * (states5(b + 1) - goals[i].y);
  }
}

double velocity_cost(const Eigen::VectorXd& states5,
                     std::span<const VelocityCommand> targets,
                     const CostWeights& w) {
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const int b = 5 * static_cast<int>(i);
    const double ev = states5(b + 3) - targets[i].v;
    const double ew = states5(b + 4) - targets[i].w;
    total += w.w_vv * ev * ev + w.w_vw * ew * ew;
  }
  return total;
}

void velocity_cost_gradient(const Eigen::VectorXd& states5,
                            std::span<const VelocityCommand> targets,
                            const CostWeights& w, Eigen::VectorXd& grad) {
  grad.setZero(states5.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const int b = 5 * static_cast<int>(i);
    grad(b + 3) = 2.0 * w.w_vv * (states5(b + 3) - targets[i].v);
    grad(b + 4) = 2.0 * w.w_vw * (states5(b + 4) - targets[i].w);
  }
}

// ---- MpcProblem -----------------------------------------------------------

MpcProblem::MpcProblem(std::vector<RobotState> initial_states,
                       BehaviorSpec behavior,
                       std::vector<MaintainedPair> maintained,
                       RobotFootprint footprint, MpcConfig config)
    : x0_(std::move(initial_states)),
      behavior_(std::move(behavior)),
      maintained_(std::move(maintained)),
      fp_(footprint),
      cfg_(config) {
  cfg_.validate();
  fp_.validate();
  const int n = num_robots();
  if (n < 1) throw std::invalid_argument("need at least one robot");
  per_robot_ = 5 * (cfg_.horizon + 1) + 2 * cfg_.horizon;

  const auto check_robot = [n](int r) {
    if (r < 0 || r >= n)
      throw std::invalid_argument("connection point references unknown robot");
  };
  switch (behavior_.kind) {
    case BehaviorKind::connect:
      for (const auto& t : behavior_.align) {
        check_robot(t.a.robot);
        check_robot(t.b.robot);
      }
      break;
    case BehaviorKind::goto_goal:
      if (static_cast<int>(behavior_.goals.size()) != n)
        throw std::invalid_argument("goto_goal needs one goal per robot");
      break;
    case BehaviorKind::velocity:
      if (static_cast<int>(behavior_.velocity_targets.size()) != n)
        throw std::invalid_argument("velocity needs one target per robot");
      break;
  }
  for (const auto& p : maintained_) {
    check_robot(p.owner.robot);
    check_robot(p.opening.robot);
    if (p.owner.robot == p.opening.robot)
      throw std::invalid_argument("pair endpoints must be distinct robots");
    if (p.relax < 0.0) throw std::invalid_argument("relax must be >= 0");
  }
}

int MpcProblem::num_equalities() const {
  return num_robots() * 5 * (cfg_.horizon + 1);
}

int MpcProblem::num_inequalities() const {
  int rows = 8 * num_robots() * cfg_.horizon;  // control + velocity boxes
  for (const auto& p : maintained_)
    rows += (p.knob ? 4 : 3) * cfg_.constraint_horizon;
  return rows;
}

int MpcProblem::num_pip_rows() const {
  int rows = 0;
  for (const auto& p : maintained_)
    if (!p.knob) rows += 3 * cfg_.constraint_horizon;
  return rows;
}

Eigen::VectorXd MpcProblem::initial_guess() const {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(num_variables());
  const double dt = cfg_.dt;
  for (int i = 0; i < num_robots(); ++i) {
    double px = x0_[static_cast<std::size_t>(i)].px;
    double py = x0_[static_cast<std::size_t>(i)].py;
    double th = x0_[static_cast<std::size_t>(i)].theta;
    const double v = x0_[static_cast<std::size_t>(i)].v;
    const double w = x0_[static_cast<std::size_t>(i)].w;
    for (int k = 0; k <= cfg_.horizon; ++k) {
      const int b = state_index(i, k);
      z(b) = px;
      z(b + 1) = py;
      z(b + 2) = th;  // deliberately unwrapped: the plan's heading is smooth
      z(b + 3) = v;
      z(b + 4) = w;
      px += dt * v * std::cos(th);
      py += dt * v * std::sin(th);
      th += dt * w;
    }
  }
  return z;
}

Eigen::VectorXd MpcProblem::gather_step(const Eigen::VectorXd& z, int k) const {
  Eigen::VectorXd s5(5 * num_robots());
  for (int i = 0; i < num_robots(); ++i)
    s5.segment<5>(5 * i) = z.segment<5>(state_index(i, k));
  return s5;
}

void MpcProblem::scatter_step_gradient(const Eigen::VectorXd& gs, int k,
                                       double scale,
                                       Eigen::VectorXd& grad) const {
  for (int i = 0; i < num_robots(); ++i)
    grad.segment<5>(state_index(i, k)) += scale * gs.segment<5>(5 * i);
}

double MpcProblem::behavior_step_cost(const Eigen::VectorXd& s5) const {
  switch (behavior_.kind) {
    case BehaviorKind::connect:
      return connection_cost(s5, behavior_.align, cfg_.weights);
    case BehaviorKind::goto_goal:
      return goal_cost(s5, behavior_.goals, cfg_.weights);
    case BehaviorKind::velocity:
      return velocity_cost(s5, behavior_.velocity_targets, cfg_.weights);
  }
  return 0.0;
}

void MpcProblem::behavior_step_gradient(const Eigen::VectorXd& s5,
                                        Eigen::VectorXd& grad) const {
  switch (behavior_.kind) {
    case BehaviorKind::connect:
      connection_cost_gradient(s5, behavior_.align, cfg_.weights, grad);
      return;
    case BehaviorKind::goto_goal:
      goal_cost_gradient(s5, behavior_.goals, cfg_.weights, grad);
      return;
    case BehaviorKind::velocity:
      velocity_cost_gradient(s5, behavior_.velocity_targets, cfg_.weights,
                             grad);
      return;
  }
}

double MpcProblem::cost(const Eigen::VectorXd& z) const {
  const CostWeights& w = cfg_.weights;
  const double c2 = cfg_.limits.butterfly_ratio * cfg_.limits.butterfly_ratio;
  std::vector<AlignTerm> maintain;
  maintain.reserve(maintained_.size());
  for (const auto& p : maintained_) maintain.push_back({p.owner, p.opening});

  double total = 0.0;
  for (int k = 0; k <= cfg_.horizon; ++k) {
    const Eigen::VectorXd s5 = gather_step(z, k);
    const double stage = behavior_step_cost(s5);
    total += (k == cfg_.horizon ? w.w_final : w.w_stage) * stage;
    if (k <= cfg_.constraint_horizon && !maintain.empty())
      total += w.w_connected * connection_cost(s5, maintain, w);
    if (k >= 1) {
      for (int i = 0; i < num_robots(); ++i) {
        const double v = s5(5 * i + 3), ww = s5(5 * i + 4);
        const double h = std::max(0.0, c2 * ww * ww - v * v);
        total += w.w_butterfly * h * h;
      }
    }
  }
  for (int i = 0; i < num_robots(); ++i)
    for (int k = 0; k < cfg_.horizon; ++k) {
      const int b = control_index(i, k);
      total += w.w_smooth * (z(b) * z(b) + z(b + 1) * z(b + 1));
    }
  return total;
}

void MpcProblem::cost_gradient(const Eigen::VectorXd& z,
                               Eigen::VectorXd& grad) const {
  const CostWeights& w = cfg_.weights;
  const double c2 = cfg_.limits.butterfly_ratio * cfg_.limits.butterfly_ratio;
  std::vector<AlignTerm> maintain;
  maintain.reserve(maintained_.size());
  for (const auto& p : maintained_) maintain.push_back({p.owner, p.opening});

  grad.setZero(num_variables());
  Eigen::VectorXd gs(5 * num_robots());
  for (int k = 0; k <= cfg_.horizon; ++k) {
    const Eigen::VectorXd s5 = gather_step(z, k);
    behavior_step_gradient(s5, gs);
    scatter_step_gradient(gs, k, k == cfg_.horizon ? w.w_final : w.w_stage,
                          grad);
    if (k <= cfg_.constraint_horizon && !maintain.empty()) {
      connection_cost_gradient(s5, maintain, w, gs);
      scatter_step_gradient(gs, k, w.w_connected, grad);
    }
    if (k >= 1) {
      for (int i = 0; i < num_robots(); ++i) {
        const double v = s5(5 * i + 3), ww = s5(5 * i + 4);
        const double h = c2 * ww * ww - v * v;
        if (h > 0.0) {
          const int b = state_index(i, k);
          grad(b + 3) += w.w_butterfly * 2.0 * h * (-2.0 * v);
          grad(b + 4) += w.w_butterfly * 2.0 * h * (2.0 * c2 * ww);
        }
      }
    }
  }
  for (int i = 0; i < num_robots(); ++i)
    for (int k = 0; k < cfg_.horizon; ++k) {
      const int b = control_index(i, k);
      grad(b) += 2.0 * w.w_smooth * z(b);
      grad(b + 1) += 2.0 * w.w_smooth * z(b + 1);
    }
}

void MpcProblem::equalities(const Eigen::VectorXd& z, Eigen::VectorXd& c,
                            Eigen::MatrixXd* jac) const {
  const int me = num_equalities();
  c.resize(me);
  if (jac) jac->setZero(me, num_variables());
  const double dt = cfg_.dt;

  for (int i = 0; i < num_robots(); ++i) {
    const RobotState& s0 = x0_[static_cast<std::size_t>(i)];
    const int rb = i * 5 * (cfg_.horizon + 1);
    const int xb = state_index(i, 0);
    c(rb) = z(xb) - s0.px;
    c(rb + 1) = z(xb + 1) - s0.py;
    c(rb + 2) = z(xb + 2) - s0.theta;
    c(rb + 3) = z(xb + 3) - s0.v;
    c(rb + 4) = z(xb + 4) - s0.w;
    if (jac)
      for (int j = 0; j < 5; ++j) (*jac)(rb + j, xb + j) = 1.0;

    for (int k = 0; k < cfg_.horizon; ++k) {
      const int r = rb + 5 * (k + 1);
      const int xk = state_index(i, k);
      const int xn = state_index(i, k + 1);
      const int uk = control_index(i, k);
      const double th = z(xk + 2), v = z(xk + 3), w = z(xk + 4);
      const double ct = std::cos(th), st = std::sin(th);

      c(r) = z(xn) - (z(xk) + dt * v * ct);
      c(r + 1) = z(xn + 1) - (z(xk + 1) + dt * v * st);
      c(r + 2) = z(xn + 2) - (z(xk + 2) + dt * w);
      c(r + 3) = z(xn + 3) - (z(xk + 3) + dt * z(uk));
      c(r + 4) = z(xn + 4) - (z(xk + 4) + dt * z(uk + 1));

      if (jac) {
        for (int j = 0; j < 5; ++j) {
          (*jac)(r + j, xn + j) = 1.0;
          (*jac)(r + j, xk + j) = -1.0;
        }
        (*jac)(r, xk + 2) = dt * v * st;
        (*jac)(r, xk + 3) = -dt * ct;
        (*jac)(r + 1, xk + 2) = -dt * v * ct;
        (*jac)(r + 1, xk + 3) = -dt * st;
        (*jac)(r + 2, xk + 4) = -dt;
        (*jac)(r + 3, uk) = -dt;
        (*jac)(r + 4, uk + 1) = -dt;
      }
    }
  }
}

void MpcProblem::inequalities(const Eigen::VectorXd& z, Eigen::VectorXd& c,
                              Eigen::MatrixXd* jac) const {
  const int mi = num_inequalities();
  c.resize(mi);
  if (jac) jac->setZero(mi, num_variables());
  const ActuationLimits& lim = cfg_.limits;
  int r = 0;

  for (int i = 0; i < num_robots(); ++i)
    for (int k = 0; k < cfg_.horizon; ++k) {
      const int uk = control_index(i, k);
      c(r) = z(uk) - lim.vdot_max;
      c(r + 1) = -z(uk) - lim.vdot_max;
      c(r + 2) = z(uk + 1) - lim.wdot_max;
      c(r + 3) = -z(uk + 1) - lim.wdot_max;
      if (jac) {
        (*jac)(r, uk) = 1.0;
        (*jac)(r + 1, uk) = -1.0;
        (*jac)(r + 2, uk + 1) = 1.0;
        (*jac)(r + 3, uk + 1) = -1.0;
      }
      r += 4;
    }

  // k = 0 is the measured state: constraining it could only poison the QP
  for (int i = 0; i < num_robots(); ++i)
    for (int k = 1; k <= cfg_.horizon; ++k) {
      const int xk = state_index(i, k);
      c(r) = z(xk + 3) - lim.v_max;
      c(r + 1) = -z(xk + 3) - lim.v_max;
      c(r + 2) = z(xk + 4) - lim.w_max;
      c(r + 3) = -z(xk + 4) - lim.w_max;
      if (jac) {
        (*jac)(r, xk + 3) = 1.0;
        (*jac)(r + 1, xk + 3) = -1.0;
        (*jac)(r + 2, xk + 4) = 1.0;
        (*jac)(r + 3, xk + 4) = -1.0;
      }
      r += 4;
    }

  const Point2 corner_r = fp_.front_right_corner();
  const Point2 corner_l = fp_.front_left_corner();
  const double elen[3] = {corner_r.norm(), (corner_l - corner_r).norm(),
                          corner_l.norm()};

  for (const auto& p : maintained_) {
    for (int k = 1; k <= cfg_.constraint_horizon; ++k) {
      const int xo = state_index(p.owner.robot, k);
      const int xp = state_index(p.opening.robot, k);

      if (p.knob) {
        const double tho = z(xo + 2), thp = z(xp + 2);
        const double co = std::cos(tho), so = std::sin(tho);
        const double cp2 = std::cos(thp), sp = std::sin(thp);
        const Point2 oa = p.owner.offset, ob = p.opening.offset;
        const double ax = z(xo) + co * oa.x - so * oa.y;
        const double ay = z(xo + 1) + so * oa.x + co * oa.y;
        const double bx = z(xp) + cp2 * ob.x - sp * ob.y;
        const double by = z(xp + 1) + sp * ob.x + cp2 * ob.y;
        const double lim_xy = cfg_.epsilon + p.relax;
        const Point2 da = rot_deriv(tho, oa);
        const Point2 db = rot_deriv(thp, ob);
        const double dx = ax - bx, dy = ay - by;
        const double sgn[4] = {1.0, -1.0, 1.0, -1.0};
        const double val[4] = {dx, dx, dy, dy};
        for (int q = 0; q < 4; ++q) {
          c(r + q) = sgn[q] * val[q] - lim_xy;
          if (jac) {
            const bool is_x = q < 2;
            (*jac)(r + q, xo + (is_x ? 0 : 1)) = sgn[q];
            (*jac)(r + q, xo + 2) = sgn[q] * (is_x ? da.x : da.y);
            (*jac)(r + q, xp + (is_x ? 0 : 1)) = -sgn[q];
            (*jac)(r + q, xp + 2) = -sgn[q] * (is_x ? db.x : db.y);
          }
        }
        r += 4;
        continue;
      }

      // anchor containment: head rest point inside the opening triangle
      const double tho = z(xo + 2), thp = z(xp + 2);
      const double co = std::cos(tho), so = std::sin(tho);
      const double cp2 = std::cos(thp), sp = std::sin(thp);
      const Point2 h = p.head_offset;
      const double hx = z(xo) + co * h.x - so * h.y;
      const double hy = z(xo + 1) + so * h.x + co * h.y;
      const Point2 dh = rot_deriv(tho, h);

      const Point2 verts_body[3] = {{0.0, 0.0}, corner_r, corner_l};
      Point2 verts[3];
      Point2 dverts[3];
      for (int q = 0; q < 3; ++q) {
        verts[q] = {z(xp) + cp2 * verts_body[q].x - sp * verts_body[q].y,
                    z(xp + 1) + sp * verts_body[q].x + cp2 * verts_body[q].y};
        dverts[q] = rot_deriv(thp, verts_body[q]);
      }

      for (int e = 0; e < 3; ++e) {
        const Point2& A = verts[e];
        const Point2& B = verts[(e + 1) % 3];
        c(r + e) = (B.y - A.y) * (hx - A.x) - (B.x - A.x) * (hy - A.y) -
                   p.relax * elen[e];
        if (jac) {
          const double dr_dhx = B.y - A.y;
          const double dr_dhy = -(B.x - A.x);
          const double dr_dax = hy - B.y;
          const double dr_day = B.x - hx;
          const double dr_dbx = -(hy - A.y);
          const double dr_dby = hx - A.x;
          // owner: through the head point
          (*jac)(r + e, xo) += dr_dhx;
          (*jac)(r + e, xo + 1) += dr_dhy;
          (*jac)(r + e, xo + 2) += dr_dhx * dh.x + dr_dhy * dh.y;
          // opening: through both edge endpoints
          const Point2& dA = dverts[e];
          const Point2& dB = dverts[(e + 1) % 3];
          (*jac)(r + e, xp) += dr_dax + dr_dbx;
          (*jac)(r + e, xp + 1) += dr_day + dr_dby;
          (*jac)(r + e, xp + 2) +=
              dr_dax * dA.x + dr_day * dA.y + dr_dbx * dB.x + dr_dby * dB.y;
        }
      }
      r += 3;
    }
  }
}

double MpcProblem::max_pip_violation(const Eigen::VectorXd& z) const {
  const Point2 corner_r = fp_.front_right_corner();
  const Point2 corner_l = fp_.front_left_corner();
  double worst = 0.0;
  for (const auto& p : maintained_) {
    if (p.knob) continue;
    for (int k = 1; k <= cfg_.constraint_horizon; ++k) {
      const int xo = state_index(p.owner.robot, k);
      const int xp = state_index(p.opening.robot, k);
      const Pose2 owner{{z(xo), z(xo + 1)}, z(xo + 2)};
      const Pose2 opening{{z(xp), z(xp + 1)}, z(xp + 2)};
      const Point2 head = transform_point(owner, p.head_offset);
      const Point2 verts[3] = {
          transform_point(opening, {0.0, 0.0}),
          transform_point(opening, corner_r),
          transform_point(opening, corner_l),
      };
      for (int e = 0; e < 3; ++e) {
        const Point2& A = verts[e];
        const Point2& B = verts[(e + 1) % 3];
        const double res =
            (B.y - A.y) * (head.x - A.x) - (B.x - A.x) * (head.y - A.y);
        worst = std::max(worst, res);
      }
    }
  }
  return worst;
}

}  // namespace flexcouple
