#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cstring>
#include <optional>

#include "flexcouple/qp.hpp"
#include "flexcouple/rng.hpp"

using namespace flexcouple;

namespace {

struct OracleSolution {
  Eigen::VectorXd x;
  double objective;
};

// Brute force: enumerate every active subset of inequalities, solve the
// equality-KKT system, keep candidates that are primal feasible with
// nonnegative inequality multipliers, return the best. Convex problem =>
// any KKT point is the global optimum, so this is an exact oracle for
// small instances.
std::optional<OracleSolution> brute_force_qp(const Eigen::MatrixXd& H,
                                             const Eigen::VectorXd& g,
                                             const Eigen::MatrixXd& Ae,
                                             const Eigen::VectorXd& be,
                                             const Eigen::MatrixXd& Ai,
                                             const Eigen::VectorXd& bi) {
  const int n = static_cast<int>(H.rows());
  const int me = static_cast<int>(Ae.rows());
  const int mi = static_cast<int>(Ai.rows());
  std::optional<OracleSolution> best;

  for (unsigned mask = 0; mask < (1u << mi); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < mi; ++i)
      if (mask & (1u << i)) act.push_back(i);
    const int ma = static_cast<int>(act.size());
    const int m = me + ma;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
    Eigen::VectorXd rhs(n + m);
    K.topLeftCorner(n, n) = H;
    rhs.head(n) = -g;
    for (int r = 0; r < me; ++r) {
      K.block(n + r, 0, 1, n) = Ae.row(r);
      K.block(0, n + r, n, 1) = Ae.row(r).transpose();
      rhs(n + r) = be(r);
    }
    for (int r = 0; r < ma; ++r) {
      K.block(n + me + r, 0, 1, n) = Ai.row(act[static_cast<std::size_t>(r)]);
      K.block(0, n + me + r, n, 1) =
          Ai.row(act[static_cast<std::size_t>(r)]).transpose();
      rhs(n + me + r) = bi(act[static_cast<std::size_t>(r)]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd x = sol.head(n);

    bool ok = true;
    for (int r = 0; r < ma && ok; ++r)
      if (sol(n + me + r) < -1e-9) ok = false;  // dual feasibility
    if (ok && me > 0 && (Ae * x - be).cwiseAbs().maxCoeff() > 1e-8) ok = false;
    for (int r = 0; r < mi && ok; ++r)
      if (Ai.row(r).dot(x) - bi(r) > 1e-8) ok = false;  // primal feasibility
    if (!ok) continue;

    const double obj = 0.5 * x.dot(H * x) + g.dot(x);
    if (!best || obj < best->objective - 1e-12) best = {x, obj};
  }
  return best;
}

Eigen::MatrixXd random_spd(UniformRng& rng, int n) {
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = rng.range(-1.0, 1.0);
  return M.transpose() * M +
         (0.1 + rng.next()) * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

TEST_CASE("unconstrained minimum") {
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd g(2);
  g << -2.0, 0.0;
  Eigen::MatrixXd A0(0, 2);
  Eigen::VectorXd b0(0);
  Eigen::VectorXd x;
  const auto res = solve_qp(H, g, A0, b0, A0, b0, x);
  REQUIRE(res.status == QpStatus::optimal);
  CHECK(x(0) == doctest::Approx(2.0));
  CHECK(x(1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("projection onto the nonnegative orthant") {
  const int n = 3;
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd p(n);
  p << 1.5, -2.0, 0.5;
  Eigen::MatrixXd Ai = -Eigen::MatrixXd::Identity(n, n);  // -x <= 0
  Eigen::VectorXd bi = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd A0(0, n);
  Eigen::VectorXd b0(0);
  Eigen::VectorXd x, li;
  const auto res = solve_qp(H, -p, A0, b0, Ai, bi, x, nullptr, &li);
  REQUIRE(res.status == QpStatus::optimal);
  CHECK(x(0) == doctest::Approx(1.5));
  CHECK(x(1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(x(2) == doctest::Approx(0.5));
  CHECK(li(1) == doctest::Approx(2.0));  // multiplier = pulled distance
}

TEST_CASE("equality constrained: uniform split") {
  const int n = 4;
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd Ae = Eigen::MatrixXd::Ones(1, n);
  Eigen::VectorXd be = Eigen::VectorXd::Ones(1);
  Eigen::MatrixXd A0(0, n);
  Eigen::VectorXd b0(0);
  Eigen::VectorXd x, le;
  const auto res = solve_qp(H, g, Ae, be, A0, b0, x, &le);
  REQUIRE(res.status == QpStatus::optimal);
  for (int i = 0; i < n; ++i) CHECK(x(i) == doctest::Approx(0.25));
  // stationarity: x + Ae' * lambda = 0  =>  lambda = -0.25
  CHECK(le(0) == doctest::Approx(-0.25));
}

TEST_CASE("conflicting bounds are reported infeasible") {
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(1, 1);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(1);
  Eigen::MatrixXd Ai(2, 1);
  Ai << 1.0, -1.0;  // x <= -1 and x >= 1
  Eigen::VectorXd bi(2);
  bi << -1.0, -1.0;
  Eigen::MatrixXd A0(0, 1);
  Eigen::VectorXd b0(0);
  Eigen::VectorXd x;
  CHECK(solve_qp(H, g, A0, b0, Ai, bi, x).status == QpStatus::infeasible);
}

TEST_CASE("indefinite objective is rejected") {
  Eigen::MatrixXd H(2, 2);
  H << 1.0, 0.0, 0.0, -1.0;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd A0(0, 2);
  Eigen::VectorXd b0(0);
  Eigen::VectorXd x;
  CHECK(solve_qp(H, g, A0, b0, A0, b0, x).status ==
        QpStatus::numerical_failure);
}

TEST_CASE("randomized problems agree with active-set enumeration") {
  UniformRng rng(42);
  int feasible_cases = 0, infeasible_cases = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + static_cast<int>(rng.next() * 4.0);   // 2..5
    const int me = static_cast<int>(rng.next() * 2.0);      // 0..1
    const int mi = static_cast<int>(rng.next() * 7.0);      // 0..6
    const Eigen::MatrixXd H = random_spd(rng, n);
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) g(i) = rng.range(-2.0, 2.0);
    Eigen::VectorXd xf(n);  // anchor point for constraint generation
    for (int i = 0; i < n; ++i) xf(i) = rng.range(-1.0, 1.0);
    Eigen::MatrixXd Ae(me, n), Ai(mi, n);
    Eigen::VectorXd be(me), bi(mi);
    for (int r = 0; r < me; ++r) {
      for (int j = 0; j < n; ++j) Ae(r, j) = rng.range(-1.0, 1.0);
      be(r) = Ae.row(r).dot(xf);
    }
    for (int r = 0; r < mi; ++r) {
      for (int j = 0; j < n; ++j) Ai(r, j) = rng.range(-1.0, 1.0);
      bi(r) = Ai.row(r).dot(xf) + rng.range(-0.5, 1.0);
    }

    const auto oracle = brute_force_qp(H, g, Ae, be, Ai, bi);
    Eigen::VectorXd x, le, li;
    const auto res = solve_qp(H, g, Ae, be, Ai, bi, x, &le, &li);

    CAPTURE(trial);
    if (oracle) {
      ++feasible_cases;
      REQUIRE(res.status == QpStatus::optimal);
      CHECK(res.objective ==
            doctest::Approx(oracle->objective).epsilon(1e-6));
      CHECK((x - oracle->x).cwiseAbs().maxCoeff() < 1e-5);
      // KKT at the reported solution
      Eigen::VectorXd stat = H * x + g;
      if (me) stat += Ae.transpose() * le;
      if (mi) stat += Ai.transpose() * li;
      CHECK(stat.cwiseAbs().maxCoeff() < 1e-7);
      for (int r = 0; r < mi; ++r) {
        CHECK(li(r) > -1e-9);
        CHECK(std::abs(li(r) * (Ai.row(r).dot(x) - bi(r))) < 1e-6);
      }
    } else {
      ++infeasible_cases;
      REQUIRE(res.status == QpStatus::infeasible);
    }
  }
  // the generator must actually exercise both outcomes
  CHECK(feasible_cases > 300);
  CHECK(infeasible_cases > 20);
}

TEST_CASE("identical input gives bit-identical output") {
  UniformRng rng(7);
  const int n = 6;
  const Eigen::MatrixXd H = random_spd(rng, n);
  Eigen::VectorXd g(n);
  for (int i = 0; i < n; ++i) g(i) = rng.range(-2.0, 2.0);
  Eigen::MatrixXd Ae(2, n), Ai(8, n);
  Eigen::VectorXd be(2), bi(8);
  for (int r = 0; r < 2; ++r) {
    for (int j = 0; j < n; ++j) Ae(r, j) = rng.range(-1.0, 1.0);
    be(r) = rng.range(-0.5, 0.5);
  }
  for (int r = 0; r < 8; ++r) {
    for (int j = 0; j < n; ++j) Ai(r, j) = rng.range(-1.0, 1.0);
    bi(r) = rng.range(0.0, 1.0);
  }
  Eigen::VectorXd x1, x2;
  const auto r1 = solve_qp(H, g, Ae, be, Ai, bi, x1);
  const auto r2 = solve_qp(H, g, Ae, be, Ai, bi, x2);
  REQUIRE(r1.status == QpStatus::optimal);
  REQUIRE(r2.status == QpStatus::optimal);
  CHECK(r1.iterations == r2.iterations);
  CHECK(std::memcmp(x1.data(), x2.data(),
                    sizeof(double) * static_cast<std::size_t>(n)) == 0);
}
