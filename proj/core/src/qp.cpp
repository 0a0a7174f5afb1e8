#include "flexcouple/qp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace flexcouple {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Fold d(n-1..iq+1) into d(iq) with Givens rotations (mirrored into J's
// trailing columns, which only recombines the null-space basis), then
// append d(0..iq) as a new column of R. Returns false when the incoming
// normal is numerically dependent on the active set.
bool add_constraint(Eigen::MatrixXd& R, Eigen::MatrixXd& J, Eigen::VectorXd& d,
                    int& iq, double& R_norm) {
  const int n = static_cast<int>(J.rows());
  for (int k = n - 1; k > iq; --k) {
    const double a = d(k - 1), b = d(k);
    if (b == 0.0) continue;
    const double h = std::hypot(a, b);
    const double c = a / h, s = b / h;
    d(k - 1) = h;
    d(k) = 0.0;
    for (int row = 0; row < n; ++row) {
      const double t1 = J(row, k - 1), t2 = J(row, k);
      J(row, k - 1) = c * t1 + s * t2;
      J(row, k) = -s * t1 + c * t2;
    }
  }
  ++iq;
  R.col(iq - 1).head(iq) = d.head(iq);
  const bool independent =
      std::abs(d(iq - 1)) >
      1e2 * std::numeric_limits<double>::epsilon() * std::max(R_norm, 1.0);
  R_norm = std::max(R_norm, std::abs(d(iq - 1)));
  return independent;
}

// Remove active constraint at position l. u(iq) holds the incoming
// constraint's accumulated multiplier and rides down with the shift.
void drop_constraint(Eigen::MatrixXd& R, Eigen::MatrixXd& J,
                     std::vector<int>& active, Eigen::VectorXd& u, int& iq,
                     int l) {
  const int n = static_cast<int>(J.rows());
  for (int j = l; j < iq - 1; ++j) {
    active[static_cast<std::size_t>(j)] =
        active[static_cast<std::size_t>(j) + 1];
    u(j) = u(j + 1);
    R.col(j).head(iq) = R.col(j + 1).head(iq);
  }
  u(iq - 1) = u(iq);
  u(iq) = 0.0;
  active.pop_back();
  --iq;
  // restore triangularity of R(0..iq-1, l..iq-1)
  for (int j = l; j < iq; ++j) {
    const double a = R(j, j), b = R(j + 1, j);
    if (b == 0.0) continue;
    const double h = std::hypot(a, b);
    const double c = a / h, s = b / h;
    for (int k = j; k < iq; ++k) {
      const double t1 = R(j, k), t2 = R(j + 1, k);
      R(j, k) = c * t1 + s * t2;
      R(j + 1, k) = -s * t1 + c * t2;
    }
    for (int row = 0; row < n; ++row) {
      const double t1 = J(row, j), t2 = J(row, j + 1);
      J(row, j) = c * t1 + s * t2;
      J(row, j + 1) = -s * t1 + c * t2;
    }
  }
}

}  // namespace

QpResult solve_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                  const Eigen::MatrixXd& A_eq, const Eigen::VectorXd& b_eq,
                  const Eigen::MatrixXd& A_in, const Eigen::VectorXd& b_in,
                  Eigen::VectorXd& x, Eigen::VectorXd* lambda_eq,
                  Eigen::VectorXd* lambda_in) {
  const int n = static_cast<int>(H.rows());
  const int me = static_cast<int>(A_eq.rows());
  const int mi = static_cast<int>(A_in.rows());
  QpResult res;

  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) {
    res.status = QpStatus::numerical_failure;
    return res;
  }

  // J = L^-T: the active-set geometry lives in the H^-1 metric.
  Eigen::MatrixXd J = Eigen::MatrixXd::Identity(n, n);
  llt.matrixU().solveInPlace(J);

  x = llt.solve(-g);  // unconstrained minimum: the dual method's start

  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
  double R_norm = 1.0;
  std::vector<int> active;  // global index: [0,me) equalities, me+j = ineq j
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n + 1);
  Eigen::VectorXd d(n), z(n), r(n), np(n);
  int iq = 0;

  const double eps = std::numeric_limits<double>::epsilon();
  const int max_iter = 100 + 10 * (me + mi);

  const auto compute_step_dirs = [&]() {
    d.noalias() = J.transpose() * np;
    z.setZero();
    if (iq < n) z.noalias() = J.rightCols(n - iq) * d.tail(n - iq);
    if (iq > 0) {
      r.head(iq) = d.head(iq);
      R.topLeftCorner(iq, iq)
          .triangularView<Eigen::Upper>()
          .solveInPlace(r.head(iq));
    }
  };

  // Phase 1: install the equalities.
  for (int i = 0; i < me; ++i) {
    np = A_eq.row(i).transpose();
    compute_step_dirs();
    const double resid = np.dot(x) - b_eq(i);
    const double zn = z.dot(np);  // = ||proj of np on null(active)||^2 >= 0
    if (zn > eps * std::max(1.0, np.squaredNorm())) {
      const double t2 = -resid / zn;
      x += t2 * z;
      u.head(iq) -= t2 * r.head(iq);
      u(iq) += t2;
      active.push_back(i);
      if (!add_constraint(R, J, d, iq, R_norm)) {
        res.status = QpStatus::numerical_failure;
        return res;
      }
    } else if (std::abs(resid) > 1e-9 * std::max(1.0, std::abs(b_eq(i)))) {
      res.status = QpStatus::infeasible;  // dependent and inconsistent
      return res;
    }  // else: dependent but satisfied -> redundant row, skip
    ++res.iterations;
  }

  // Phase 2: dual iterations over the inequalities. GI slack of row i is
  // s(i) = b_in(i) - A_in.row(i) x, which must end >= 0.
  std::vector<char> is_active(static_cast<std::size_t>(mi), 0);
  std::vector<char> excluded(static_cast<std::size_t>(mi), 0);
  const double viol_tol =
      1e-11 * std::max(1.0, mi > 0 ? b_in.cwiseAbs().maxCoeff() : 0.0);

  while (true) {
    if (++res.iterations > max_iter) {
      res.status = QpStatus::max_iterations;
      return res;
    }

    int ip = -1;
    double worst = -viol_tol;
    for (int i = 0; i < mi; ++i) {
      if (is_active[static_cast<std::size_t>(i)] ||
          excluded[static_cast<std::size_t>(i)])
        continue;
      const double s_i = b_in(i) - A_in.row(i).dot(x);
      if (s_i < worst) {  // strict: ties resolve to the lowest index
        worst = s_i;
        ip = i;
      }
    }
    if (ip < 0) break;  // dual feasible and primal feasible: optimal

    np = -A_in.row(ip).transpose();  // GI works with n'x >= b

    while (true) {  // inner: dual steps until ip becomes active
      compute_step_dirs();
      const double slack = b_in(ip) - A_in.row(ip).dot(x);

      double t1 = kInf;
      int l = -1;
      for (int k = 0; k < iq; ++k) {
        if (active[static_cast<std::size_t>(k)] < me) continue;
        if (r(k) > eps && u(k) / r(k) < t1) {
          t1 = u(k) / r(k);
          l = k;
        }
      }
      const double zn = z.dot(np);
      const bool z_ok = zn > eps * std::max(1.0, np.squaredNorm());
      const double t2 = z_ok ? -slack / zn : kInf;
      const double t = std::min(t1, t2);

      if (t >= kInf) {
        res.status = QpStatus::infeasible;  // dual ray: no feasible point
        return res;
      }

      if (!z_ok) {  // pure dual step: drop the blocker, stay on ip
        u.head(iq) -= t * r.head(iq);
        u(iq) += t;
        is_active[static_cast<std::size_t>(
            active[static_cast<std::size_t>(l)] - me)] = 0;
        drop_constraint(R, J, active, u, iq, l);
        if (++res.iterations > max_iter) {
          res.status = QpStatus::max_iterations;
          return res;
        }
        continue;
      }

      x += t * z;
      u.head(iq) -= t * r.head(iq);
      u(iq) += t;

      if (t == t2) {
        active.push_back(me + ip);
        if (add_constraint(R, J, d, iq, R_norm)) {
          is_active[static_cast<std::size_t>(ip)] = 1;
        } else {
          // numerically dependent exactly at zero slack: undo and retire ip
          // (trailing-column rotations inside add_constraint are harmless).
          --iq;
          active.pop_back();
          x -= t * z;
          u.head(iq) += t * r.head(iq);
          u(iq) -= t;
          excluded[static_cast<std::size_t>(ip)] = 1;
        }
        break;
      }

      // partial step: blocker leaves, ip is still violated
      is_active[static_cast<std::size_t>(
          active[static_cast<std::size_t>(l)] - me)] = 0;
      drop_constraint(R, J, active, u, iq, l);
      if (++res.iterations > max_iter) {
        res.status = QpStatus::max_iterations;
        return res;
      }
    }
  }

  if (lambda_eq) {
    lambda_eq->setZero(me);
    for (int k = 0; k < iq; ++k) {
      const int a = active[static_cast<std::size_t>(k)];
      if (a < me) (*lambda_eq)(a) = -u(k);  // GI sign -> Lagrangian sign
    }
  }
  if (lambda_in) {
    lambda_in->setZero(mi);
    for (int k = 0; k < iq; ++k) {
      const int a = active[static_cast<std::size_t>(k)];
      if (a >= me) (*lambda_in)(a - me) = u(k);
    }
  }
  res.objective = 0.5 * x.dot(H * x) + g.dot(x);
  res.status = QpStatus::optimal;
  return res;
}

}  // namespace flexcouple
