#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <memory>
#include <sstream>

#include "ipag/error.hpp"
#include "ipag/problems.hpp"
#include "ipag/prox.hpp"

using namespace ipag;

namespace {

// Dense eigenvalues from Eigen's solver, independent of the library's power
// iteration.
Vector eigenvalues(const Matrix& symmetric) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(symmetric, Eigen::EigenvaluesOnly).eigenvalues();
}

Vector uniform_point(int n, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return Vector::NullaryExpr(n, [&] { return u(rng); });
}

bool same_instance(const QpInstance& a, const QpInstance& b) {
  if (a.n != b.n || a.m != b.m || a.A != b.A || a.B != b.B || a.D != b.D || a.b != b.b ||
      a.delta != b.delta || a.tau_obj != b.tau_obj || a.noise_std != b.noise_std) {
    return false;
  }
  for (int i = 0; i < a.m; ++i) {
    const auto& ca = a.constraints[static_cast<std::size_t>(i)];
    const auto& cb = b.constraints[static_cast<std::size_t>(i)];
    if (ca.Q != cb.Q || ca.d != cb.d || ca.c != cb.c) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("small instance has a strictly feasible origin") {
  const QpInstance qp = generate_qp(4, 1, 0, 1.0);
  CHECK(qp.p == 2);
  const double phi0 = qp.constraint_set()->constraint_values(Vector::Zero(4))[0];
  CHECK(phi0 == -qp.constraints[0].c);
  CHECK(phi0 >= -2.0);
  CHECK(phi0 <= -1.0);
}

TEST_CASE("generated instances are nonconvex with the reported spectrum") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    for (int n : {4, 6, 8}) {
      const QpInstance qp = generate_qp(n, 2, seed, 1.0);
      const Vector ev = eigenvalues(qp.hessian);
      CHECK(ev.minCoeff() < -1e-6);
      CHECK(qp.min_eigenvalue == doctest::Approx(ev.minCoeff()).epsilon(1e-6));
      const double spectral = std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
      CHECK(std::abs(qp.lipschitz - spectral) <= 1e-6 * spectral);
      // Hessian from the raw data, not the cached product.
      const Matrix DB = qp.D.asDiagonal() * qp.B;
      const Matrix H = -qp.delta * DB.transpose() * DB + qp.tau_obj * qp.A.transpose() * qp.A;
      CHECK((H - qp.hessian).norm() <= 1e-9 * H.norm());
    }
  }
}

TEST_CASE("generator draws follow the stated distributions") {
  const QpInstance qp = generate_qp(20, 5, 3, 0.5);
  CHECK(qp.A.rows() == 10);
  CHECK(qp.A.minCoeff() >= 0.0);
  CHECK(qp.A.maxCoeff() <= 1.0);
  CHECK(qp.B.minCoeff() >= 0.0);
  CHECK(qp.B.maxCoeff() <= 1.0);
  CHECK(qp.b.minCoeff() >= 0.0);
  CHECK(qp.b.maxCoeff() <= 1.0);
  for (Eigen::Index i = 0; i < qp.D.size(); ++i) {
    CHECK(qp.D[i] == std::round(qp.D[i]));
    CHECK(qp.D[i] >= 1.0);
    CHECK(qp.D[i] <= 1000.0);
  }
  CHECK(qp.tau_obj == 1.0);
  CHECK(qp.box == 10.0);
  for (const auto& c : qp.constraints) {
    CHECK((c.Q - c.Q.transpose()).norm() == 0.0);
    CHECK(eigenvalues(c.Q).minCoeff() >= -1e-12);
    CHECK(c.d.minCoeff() >= 0.0);
    CHECK(c.d.maxCoeff() <= 1.0);
    CHECK(c.c >= 1.0);
    CHECK(c.c <= 2.0);
  }
  CHECK(qp.constraint_set()->slater_margin() >= 1.0);

  const QpInstance two = generate_qp(20, 1, 3, 0.5, DiagonalSampling::kTwoPoint);
  for (Eigen::Index i = 0; i < two.D.size(); ++i) CHECK((two.D[i] == 1.0 || two.D[i] == 1000.0));
}

TEST_CASE("generator is deterministic and validates its arguments") {
  CHECK(same_instance(generate_qp(10, 3, 42, 1.0), generate_qp(10, 3, 42, 1.0)));
  CHECK_FALSE(same_instance(generate_qp(10, 3, 42, 1.0), generate_qp(10, 3, 43, 1.0)));
  try {
    generate_qp(5, 1, 0, 1.0);
    FAIL("expected OddDimension");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kOddDimension);
  }
  CHECK_THROWS_AS(generate_qp(2, 1, 0, 1.0), Error);
  CHECK_THROWS_AS(generate_qp(4, 0, 0, 1.0), Error);
  CHECK(generate_small_qp(2, 2, 0, 1.0).n == 2);
}

TEST_CASE("full gradient") {
  const QpInstance qp = generate_qp(8, 2, 5, 1.0);
  CHECK((qp_full_gradient(qp, Vector::Zero(8)) + qp.tau_obj * qp.A.transpose() * qp.b).norm() <=
        1e-12);
  Rng rng(6);
  constexpr double h = 1e-6;
  for (int i = 0; i < 10; ++i) {
    const Vector x = uniform_point(8, rng, -1.0, 1.0);
    const Vector g = qp_full_gradient(qp, x);
    for (Eigen::Index j = 0; j < 8; ++j) {
      Vector up = x, down = x;
      up[j] += h;
      down[j] -= h;
      const double fd = (qp.value(up) - qp.value(down)) / (2.0 * h);
      CHECK(std::abs(fd - g[j]) / std::max(1.0, std::abs(g[j])) < 1e-5);
    }
  }
  QpInstance convex = qp;
  convex.delta = 0.0;
  finalize_qp(convex);
  const Vector x = uniform_point(8, rng, -1.0, 1.0);
  CHECK((qp_full_gradient(convex, x) - convex.tau_obj * convex.A.transpose() * (convex.A * x - convex.b))
            .norm() <= 1e-10);
}

TEST_CASE("stochastic gradient") {
  auto qp = std::make_shared<const QpInstance>(generate_qp(10, 2, 9, 1.0));
  const Vector x = Vector::LinSpaced(10, -2.0, 2.0);
  const Vector exact = qp_full_gradient(*qp, x);

  QpInstance quiet = *qp;
  quiet.noise_std = 0.0;
  Rng rng(1);
  CHECK(qp_stochastic_gradient(quiet, x, 5, rng) == qp_full_gradient(quiet, x));

  // Large-batch proxy, per-coordinate standard error tau sigma sqrt((A'A)_ii / N).
  constexpr int kBig = 100000;
  const Vector big = qp_stochastic_gradient(*qp, x, kBig, rng);
  const Vector col_sq = (qp->A.transpose() * qp->A).diagonal();
  for (Eigen::Index i = 0; i < 10; ++i) {
    const double se = qp->tau_obj * qp->noise_std * std::sqrt(col_sq[i] / kBig);
    CHECK(std::abs(big[i] - exact[i]) <= 3.0 * se);
  }

  const QpGradientOracle oracle(qp);
  const double tau2 = oracle.variance_bound();
  CHECK(tau2 == doctest::Approx(qp->tau_obj * qp->tau_obj * qp->noise_std * qp->noise_std *
                                (qp->A.transpose() * qp->A).trace()));
  constexpr int kDraws = 10000;
  for (int batch : {1, 10, 100}) {
    double acc = 0.0;
    for (int i = 0; i < kDraws; ++i) acc += (oracle.sample(x, batch, rng) - exact).squaredNorm();
    CHECK(std::abs(acc / kDraws - tau2 / batch) <= 0.05 * tau2 / batch);
  }
}

TEST_CASE("QP composite has the origin as Slater point") {
  auto qp = std::make_shared<const QpInstance>(generate_qp(6, 3, 2, 1.0));
  const CompositeProblem p = make_qp_problem(qp);
  CHECK(p.dim() == 6);
  CHECK(p.constraint_set()->slater_point() == Vector::Zero(6));
  CHECK(p.constants.L == qp->lipschitz);
  CHECK(p.objective.weak_convexity == doctest::Approx(-qp->min_eigenvalue));
  for (int i = 0; i < 3; ++i) {
    CHECK(p.constraint_set()->constraint_values(Vector::Zero(6))[i] ==
          -qp->constraints[static_cast<std::size_t>(i)].c);
  }
}

TEST_CASE("archive round trip") {
  const QpInstance qp = generate_qp(6, 2, 11, 0.3);
  std::stringstream buffer;
  write_qp(qp, buffer);
  const QpInstance back = read_qp(buffer);
  CHECK(same_instance(qp, back));
  CHECK(back.lipschitz == doctest::Approx(qp.lipschitz).epsilon(1e-12));

  std::stringstream broken("ipag-qp-v1\nn 4 m 1 p 2\ndelta oops\n");
  try {
    read_qp(broken);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParseError);
  }
  std::stringstream wrong_header("something-else\n");
  CHECK_THROWS_AS(read_qp(wrong_header), Error);
}

TEST_CASE("analytic battery fixtures") {
  const auto battery = analytic_battery();
  REQUIRE(battery.size() == 3);

  SUBCASE("convex box minimiser is stationary") {
    const auto& a = battery[0];
    CHECK(a.name == "convex_box");
    CHECK(a.convex);
    const Vector& xs = a.stationary_points.front();
    CHECK(a.problem.objective.gradient(xs).norm() <= 1e-10);
    CHECK(a.problem.constraint_set()->contains(xs));
  }
  SUBCASE("ball fixture is a projection fixed point") {
    const auto& b = battery[1];
    const Vector& xs = b.stationary_points.front();
    const double lambda = 1.0 / (2.0 * b.problem.constants.L);
    const Vector step = xs - lambda * b.problem.objective.gradient(xs);
    const Vector proj = prox_ball(step, lambda, 5.0);
    CHECK((xs - proj).norm() <= 1e-8);
    CHECK(xs.norm() == doctest::Approx(5.0));
  }
  SUBCASE("nonconvex box stationary set matches a grid scan") {
    const auto& c = battery[2];
    CHECK_FALSE(c.convex);
    const auto& grad = c.problem.objective.gradient;
    auto residual = [&](const Vector& x) {
      return (x - (x - grad(x)).cwiseMax(-1.0).cwiseMin(1.0)).norm();
    };
    for (const Vector& s : c.stationary_points) CHECK(residual(s) <= 1e-12);
    // Every near-stationary grid point is close to a listed point.
    constexpr int kCells = 400;
    for (int i = 0; i <= kCells; ++i) {
      for (int j = 0; j <= kCells; ++j) {
        const Vector x = (Vector(2) << -1.0 + 2.0 * i / kCells, -1.0 + 2.0 * j / kCells).finished();
        if (residual(x) > 1e-3) continue;
        double nearest = INFINITY;
        for (const Vector& s : c.stationary_points) nearest = std::min(nearest, (x - s).norm());
        CHECK(nearest <= 0.05);
      }
    }
  }
  CHECK_THROWS_AS(battery_problem("missing"), Error);
}

TEST_CASE("projection battery answers are the analytic projections") {
  const auto battery = projection_battery(20, 3);
  REQUIRE(battery.size() == 20);
  int interior = 0;
  for (const auto& inst : battery) {
    const ConstraintSet& set = inst.constraint_set();
    CHECK(set.dim() <= 20);
    CHECK(set.contains(inst.solution, 1e-12));
    const auto& phi = set.constraints().front();
    if (inst.kind == "ball") {
      const double r = std::get<ConvexConstraint::Ball>(phi.shape()).radius;
      CHECK((inst.solution - prox_ball(inst.center, inst.gamma, r)).norm() <= 1e-12);
    } else {
      const auto& hs = std::get<ConvexConstraint::Halfspace>(phi.shape());
      const Vector expected =
          inst.center - std::max(0.0, hs.normal.dot(inst.center) - hs.offset) /
                            hs.normal.squaredNorm() * hs.normal;
      CHECK((inst.solution - expected).norm() <= 1e-12);
    }
    interior += inst.solution == inst.center ? 1 : 0;
  }
  CHECK(interior >= 1);
}
