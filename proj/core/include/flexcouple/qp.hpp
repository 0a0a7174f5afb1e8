#pragma once

// Dense convex QP solver (Goldfarb-Idnani dual active set):
//
//   min  1/2 x'Hx + g'x
//   s.t. A_eq x  = b_eq
//        A_in x <= b_in
//
// H must be symmetric positive definite (the SQP layer guarantees this via
// damped BFGS). Dual active-set needs no feasible starting point, detects
// primal infeasibility as dual unboundedness, and — with deterministic
// most-violated pivoting — produces bit-identical runs for identical
// inputs, which the fleet-log determinism contract relies on.

#include <Eigen/Dense>

namespace flexcouple {

enum class QpStatus { optimal, infeasible, max_iterations, numerical_failure };

struct QpResult {
  QpStatus status{QpStatus::numerical_failure};
  int iterations{0};
  double objective{0.0};
};

// On optimal: x is the minimizer; lambda_eq (free sign) and lambda_in (>= 0)
// satisfy H x + g + A_eq' lambda_eq + A_in' lambda_in = 0 with
// complementarity on the inequalities. Either multiplier output may be null.
QpResult solve_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                  const Eigen::MatrixXd& A_eq, const Eigen::VectorXd& b_eq,
                  const Eigen::MatrixXd& A_in, const Eigen::VectorXd& b_in,
                  Eigen::VectorXd& x, Eigen::VectorXd* lambda_eq = nullptr,
                  Eigen::VectorXd* lambda_in = nullptr);

}  // namespace flexcouple
