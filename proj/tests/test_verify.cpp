#include <doctest.h>

#include <cmath>
#include <memory>

#include "ipag/error.hpp"
#include "ipag/verify.hpp"

using namespace ipag;

namespace {

CompositeProblem quadratic_in_box(const Vector& c, double weight, double half_width) {
  SmoothObjective f;
  f.dim = static_cast<int>(c.size());
  f.value = [c, weight](const Vector& x) { return 0.5 * weight * (x - c).squaredNorm(); };
  f.gradient = [c, weight](const Vector& x) -> Vector { return weight * (x - c); };
  f.lipschitz = std::max(weight, 1e-12);
  auto oracle = std::make_shared<const AdditiveNoiseOracle>(f.gradient, f.dim, 0.0);
  auto set = std::make_shared<const ConstraintSet>(
      Vector::Constant(f.dim, -half_width), Vector::Constant(f.dim, half_width),
      std::vector<ConvexConstraint>{}, Vector::Zero(f.dim));
  CompositeProblem p = make_indicator_composite(f, oracle, set);
  p.constants.L = f.lipschitz;
  return p;
}

}  // namespace

TEST_CASE("stationarity residual") {
  SUBCASE("known constrained stationary point of the ball fixture") {
    const AnalyticProblem b = battery_problem("ball_projection");
    const StationarityReport r = stationarity_residual(b.problem, b.stationary_points.front());
    CHECK(r.residual_sq <= 1e-8);
    CHECK(r.analytic_projection);
    CHECK(r.lambda_used == doctest::Approx(1.0 / (2.0 * b.problem.constants.L)));
  }
  SUBCASE("zero gradient at a feasible point") {
    const CompositeProblem p = quadratic_in_box(Vector::Zero(3), 0.0, 1.0);
    const Vector z = (Vector(3) << 0.1, -0.5, 0.9).finished();
    CHECK(stationarity_residual(p, z, 0.3).residual_sq == 0.0);
  }
  SUBCASE("interior point with a small step") {
    const Vector c = (Vector(2) << 0.4, -0.2).finished();
    const CompositeProblem p = quadratic_in_box(c, 2.0, 5.0);
    const Vector z = (Vector(2) << 1.0, 1.0).finished();
    const double lambda = 0.1;
    const StationarityReport r = stationarity_residual(p, z, lambda);
    CHECK(r.residual_sq == doctest::Approx(lambda * lambda * (2.0 * (z - c)).squaredNorm()).epsilon(1e-12));
    CHECK(r.first_order_ball_radius == doctest::Approx(3.0 * 2.0 * std::sqrt(r.residual_sq)));
  }
  SUBCASE("analytic and iterative projections agree") {
    const AnalyticProblem b = battery_problem("ball_projection");
    Rng rng(1);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (int i = 0; i < 10; ++i) {
      const Vector z = Vector::NullaryExpr(3, [&] { return u(rng); });
      const StationarityReport analytic = stationarity_residual(b.problem, z);
      const double lambda = analytic.lambda_used;
      const ProxQuery query(b.problem.nonsmooth, z - lambda * b.problem.objective.gradient(z), lambda);
      const Vector iterative =
          solve_with_restoration(query, b.problem.constraint_set()->clamp(query.center()),
                                 kReferenceInnerBudget)
              .point;
      CHECK(std::abs((z - iterative).squaredNorm() - analytic.residual_sq) <= 1e-8);
    }
  }
  SUBCASE("reference solve on a quadratic-constraint set is accurate") {
    auto qp = std::make_shared<const QpInstance>(generate_qp(4, 2, 1, 1.0));
    const CompositeProblem p = make_qp_problem(qp);
    // The default budget certifies about 6e-10 here; 1e-10 needs ten times more.
    const StationarityReport r =
        stationarity_residual(p, Vector::Constant(4, 0.5), 1.0 / (2.0 * p.constants.L), 100000);
    CHECK_FALSE(r.analytic_projection);
    CHECK(r.residual_sq >= 0.0);
    CHECK(r.projection_accuracy <= 1e-10);
    CHECK(p.constraint_set()->contains(r.projection));
  }
  SUBCASE("nonpositive lambda is rejected") {
    const CompositeProblem p = quadratic_in_box(Vector::Zero(2), 1.0, 1.0);
    CHECK_THROWS_AS(stationarity_residual(p, Vector::Zero(2), 0.0), Error);
  }
}

TEST_CASE("prefix minimum of the stationarity residual reaches 1e-4 on a convex run") {
  const AnalyticProblem b = battery_problem("ball_projection", 0.1);
  constexpr int kHorizon = 400;
  Rng rng(2);
  const IpagTrace trace =
      run_constrained(b.problem, accelerated_schedule(b.problem.constants.L, kHorizon),
                      PrimalDualSolver{}, b.problem.constraint_set()->slater_point(),
                      std::nullopt, kHorizon, rng);
  double best = INFINITY;
  double previous = INFINITY;
  for (const auto& rec : trace.records) {
    best = std::min(best, stationarity_residual(b.problem, rec.z).residual_sq);
    CHECK(best <= previous);
    previous = best;
  }
  CHECK(best <= 1e-4);
}

TEST_CASE("brute-force prox") {
  SUBCASE("box in two dimensions") {
    const NonsmoothPart h = IndicatorOfSet{std::make_shared<const ConstraintSet>(
        Vector::Constant(2, -1.0), Vector::Constant(2, 2.0), std::vector<ConvexConstraint>{},
        Vector::Zero(2))};
    const Vector y = (Vector(2) << 3.3, 0.4567).finished();
    const ProxQuery query(h, y, 0.8);
    const Vector grid = brute_force_prox(query, 1e-3);
    const Vector exact = prox_box(y, 0.8, Vector::Constant(2, -1.0), Vector::Constant(2, 2.0));
    CHECK((grid - exact).norm() <= 2e-3);
    CHECK(query.objective(grid) - query.objective(exact) <= 1e-5);
  }
  SUBCASE("ball in two dimensions") {
    const NonsmoothPart h = IndicatorOfSet{std::make_shared<const ConstraintSet>(
        Vector::Constant(2, -3.0), Vector::Constant(2, 3.0),
        std::vector<ConvexConstraint>{ConvexConstraint::ball(2.0)}, Vector::Zero(2))};
    const Vector y = (Vector(2) << -2.5, 1.75).finished();
    const ProxQuery query(h, y, 1.0);
    const Vector grid = brute_force_prox(query, 1e-3);
    const Vector exact = prox_ball(y, 1.0, 2.0);
    // On a curved boundary the objective is flat along the arc, so the grid
    // argmin is only sqrt(step)-close even though its value is step-close.
    CHECK((grid - exact).norm() <= 5e-2);
    CHECK(query.objective(grid) - query.objective(exact) <= 1e-5);
  }
  SUBCASE("dimension four is refused") {
    const NonsmoothPart h = IndicatorOfSet{std::make_shared<const ConstraintSet>(
        Vector::Constant(4, -1.0), Vector::Constant(4, 1.0), std::vector<ConvexConstraint>{},
        Vector::Zero(4))};
    try {
      brute_force_prox(ProxQuery(h, Vector::Zero(4), 1.0), 1e-3);
      FAIL("expected DimensionTooLarge");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kDimensionTooLarge);
    }
  }
}

TEST_CASE("finite-difference checker") {
  const Vector a = (Vector(3) << 1.5, -2.0, 0.25).finished();
  std::vector<Vector> points{Vector::Zero(3), Vector::Ones(3), a};
  const double linear = finite_diff_check([&](const Vector&) -> Vector { return a; },
                                          [&](const Vector& x) { return a.dot(x) + 3.0; },
                                          points, 1e-6);
  // Central differences of an exact linear function only carry roundoff,
  // about eps * |value| / step.
  CHECK(linear <= 1e-8);

  const QpInstance qp = generate_qp(6, 1, 4, 1.0);
  Rng rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vector> random;
  for (int i = 0; i < 10; ++i) random.push_back(Vector::NullaryExpr(6, [&] { return u(rng); }));
  CHECK(finite_diff_check([&](const Vector& x) { return qp_full_gradient(qp, x); },
                          [&](const Vector& x) { return qp.value(x); }, random, 1e-6) < 1e-5);
  const auto set = qp.constraint_set();
  const auto& phi = set->constraints().front();
  CHECK(finite_diff_check([&](const Vector& x) { return phi.gradient(x); },
                          [&](const Vector& x) { return phi.value(x); }, random, 1e-6) < 1e-5);

  // A wrong gradient is caught.
  CHECK(finite_diff_check([&](const Vector&) -> Vector { return 2.0 * a; },
                          [&](const Vector& x) { return a.dot(x); }, points, 1e-6) > 0.1);
}

TEST_CASE("log-log slope") {
  const std::vector<double> ts{25, 50, 100, 200, 400, 800};
  std::vector<double> values;
  for (double t : ts) values.push_back(7.0 * std::pow(t, -2.0));
  CHECK(loglog_slope(ts, values) == doctest::Approx(-2.0).epsilon(1e-12));
  // Values at or below the floor are dropped; too few points left gives -inf.
  values[4] = 0.0;
  values[5] = 0.0;
  CHECK(loglog_slope(ts, values) == doctest::Approx(-2.0).epsilon(1e-12));
  std::vector<double> exhausted{1e-3, 0.0, 0.0, 0.0, 0.0, 0.0};
  CHECK(std::isinf(loglog_slope(ts, exhausted)));
  CHECK_THROWS_AS(loglog_slope(ts, std::vector<double>{1.0}), Error);
}

TEST_CASE("prox audit of a short reduced-QP run") {
  auto qp = std::make_shared<const QpInstance>(generate_small_qp(2, 2, 5, 1.0));
  const CompositeProblem p = make_qp_problem(qp);
  constexpr int kHorizon = 10;
  const StepSchedule s = accelerated_schedule(qp->lipschitz, kHorizon);
  Rng rng(4);
  const IpagTrace trace =
      run_constrained(p, s, PrimalDualSolver{}, Vector::Zero(2), std::nullopt, kHorizon, rng);
  const ProxAudit audit = audit_prox_steps(p, s, trace, 1e-3, 1e-3);
  CHECK(audit.entries.size() == 2 * kHorizon);
  for (const auto& e : audit.entries) {
    CHECK(std::isfinite(e.claimed));
    CHECK(e.gap_ok);
    CHECK(e.certificate_ok);
  }
  CHECK(audit.all_ok());
}
