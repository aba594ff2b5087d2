#include <doctest.h>

#include <cmath>
#include <memory>

#include "ipag/error.hpp"
#include "ipag/inner_solver.hpp"
#include "ipag/ipag.hpp"
#include "ipag/problems.hpp"
#include "ipag/verify.hpp"

using namespace ipag;

namespace {

std::shared_ptr<const ConstraintSet> make_set(int n, double half_width,
                                              std::vector<ConvexConstraint> constraints,
                                              Vector slater) {
  return std::make_shared<const ConstraintSet>(Vector::Constant(n, -half_width),
                                               Vector::Constant(n, half_width),
                                               std::move(constraints), std::move(slater));
}

Vector halfspace_projection(const Vector& y, const Vector& a, double b) {
  return y - std::max(0.0, a.dot(y) - b) / a.squaredNorm() * a;
}

Vector uniform_point(int n, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return Vector::NullaryExpr(n, [&] { return u(rng); });
}

}  // namespace

TEST_CASE("halfspace projection meets the declared rate at t = 200") {
  const Vector a = (Vector(3) << 1.0, 2.0, -1.0).finished();
  const double b = 1.0;
  const NonsmoothPart h = IndicatorOfSet{make_set(
      3, 50.0, {ConvexConstraint::halfspace(a, b)}, Vector::Zero(3))};
  const Vector y = (Vector(3) << 4.0, 3.0, -2.0).finished();
  const Vector exact = halfspace_projection(y, a, b);
  const Vector u0 = (Vector(3) << -1.0, 0.5, 2.0).finished();
  for (double gamma : {0.1, 1.0, 10.0}) {
    const ProxQuery query(h, y, gamma);
    const ApproxProxResult r = apd_solve(query, u0, 200);
    CHECK(r.inner_iters == 200);
    CHECK((r.point - exact).squaredNorm() <=
          kPrimalDualRateConstants.bound((u0 - exact).squaredNorm(), 200));
  }
}

TEST_CASE("interior centre is returned almost unchanged") {
  const NonsmoothPart h = IndicatorOfSet{make_set(
      2, 10.0, {ConvexConstraint::ball(3.0)}, Vector::Zero(2))};
  const Vector y = (Vector(2) << 0.5, -1.0).finished();
  const ProxQuery query(h, y, 1.0);
  const ApproxProxResult r = apd_solve(query, Vector::Constant(2, 2.0), 200);
  CHECK((r.point - y).squaredNorm() <= 1e-8);
}

TEST_CASE("ball constraint converges to the radial projection") {
  const NonsmoothPart h = IndicatorOfSet{make_set(
      3, 20.0, {ConvexConstraint::ball(2.0)}, Vector::Zero(3))};
  const Vector y = (Vector(3) << 3.0, -4.0, 6.0).finished();
  const ProxQuery query(h, y, 0.7);
  const ApproxProxResult r = apd_solve(query, Vector::Zero(3), 500);
  CHECK((r.point - prox_ball(y, 0.7, 2.0)).norm() <= 1e-6);
}

TEST_CASE("zero budget is rejected") {
  const NonsmoothPart h = IndicatorOfSet{make_set(
      2, 10.0, {ConvexConstraint::ball(3.0)}, Vector::Zero(2))};
  const ProxQuery query(h, Vector::Ones(2), 1.0);
  try {
    apd_solve(query, Vector::Zero(2), 0);
    FAIL("expected BudgetZero");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBudgetZero);
  }
}

TEST_CASE("exact projection adapter") {
  SUBCASE("box") {
    const NonsmoothPart h = IndicatorOfSet{make_set(2, 1.0, {}, Vector::Zero(2))};
    const ProxQuery query(h, (Vector(2) << 3.0, -0.5).finished(), 2.0);
    const ApproxProxResult r = exact_projection_adapter(query, Vector::Zero(2), 5);
    CHECK(r.point == (Vector(2) << 1.0, -0.5).finished());
    CHECK(r.rho == 0.0);
    CHECK(r.distance_bound == 0.0);
    CHECK(r.inner_iters == 0);
  }
  SUBCASE("ball") {
    const NonsmoothPart h = IndicatorOfSet{make_set(
        2, 10.0, {ConvexConstraint::ball(5.0)}, Vector::Zero(2))};
    const ProxQuery query(h, (Vector(2) << 6.0, 8.0).finished(), 1.0);
    const ApproxProxResult r = exact_projection_adapter(query, Vector::Zero(2), 1);
    CHECK((r.point - (Vector(2) << 3.0, 4.0).finished()).norm() <= 1e-14);
    CHECK(r.rho == 0.0);
  }
  SUBCASE("quadratic constraints have no closed form") {
    const QpInstance qp = generate_qp(4, 2, 0, 1.0);
    const NonsmoothPart h = IndicatorOfSet{qp.constraint_set()};
    const ProxQuery query(h, Vector::Ones(4), 1.0);
    CHECK_FALSE(has_exact_projection(query));
    try {
      exact_projection_adapter(query, Vector::Zero(4), 1);
      FAIL("expected UnsupportedSet");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kUnsupportedSet);
    }
  }
}

TEST_CASE("restoration examples") {
  // phi(x) = x_1 - 1 with the Slater point at x_1 = 0 (phi = -1).
  const auto one = make_set(2, 10.0,
                            {ConvexConstraint::halfspace(Vector::Unit(2, 0), 1.0)},
                            Vector::Zero(2));
  SUBCASE("single violation of 0.5") {
    const RestorationResult r = restore_feasibility((Vector(2) << 1.5, 2.0).finished(), *one);
    CHECK(r.kappa == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(r.max_violation_before == doctest::Approx(0.5));
    CHECK(one->max_constraint(r.feasible_point) <= 1e-10);
  }
  SUBCASE("feasible candidate is unchanged") {
    const Vector x = (Vector(2) << 0.5, -3.0).finished();
    const RestorationResult r = restore_feasibility(x, *one);
    CHECK(r.kappa == 0.0);
    CHECK(r.feasible_point == x);
  }
  SUBCASE("two violations 0.2 and 0.6") {
    const auto two = make_set(
        2, 10.0,
        {ConvexConstraint::halfspace(Vector::Unit(2, 0), 1.0),
         ConvexConstraint::halfspace(Vector::Unit(2, 1), 1.0)},
        Vector::Zero(2));
    const RestorationResult r = restore_feasibility((Vector(2) << 1.2, 1.6).finished(), *two);
    CHECK(r.kappa == doctest::Approx(0.375).epsilon(1e-14));
    const Vector phi = two->constraint_values(r.feasible_point);
    CHECK(phi[0] <= 0.0);
    CHECK(phi[1] <= 1e-15);
  }
  SUBCASE("Slater violation") {
    const auto bad = make_set(2, 10.0,
                              {ConvexConstraint::halfspace(Vector::Unit(2, 0), 1.0)},
                              Vector::Unit(2, 0));
    try {
      restore_feasibility(Vector::Zero(2), *bad);
      FAIL("expected SlaterViolation");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kSlaterViolation);
    }
  }
}

TEST_CASE("restoration is unconditionally feasible and obeys the kappa bound") {
  const QpInstance qp = generate_qp(8, 4, 3, 1.0);
  const auto set = qp.constraint_set();
  Rng rng(21);
  int infeasible_inputs = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vector x = uniform_point(8, rng, -10.0, 10.0) * (i % 2 == 0 ? 1.0 : 0.1);
    const RestorationResult r = restore_feasibility(x, *set);
    infeasible_inputs += r.max_violation_before > 0.0 ? 1 : 0;
    CHECK(set->max_constraint(r.feasible_point) <= 1e-10);
    CHECK(set->in_box(r.feasible_point));
    CHECK(r.kappa >= 0.0);
    CHECK(r.kappa <= 1.0);
    CHECK(r.kappa <= r.max_violation_before / set->slater_margin() + 1e-12);
  }
  CHECK(infeasible_inputs > 100);
  CHECK(infeasible_inputs < 1000);
}

TEST_CASE("kappa grows as the candidate moves away from the Slater point") {
  const QpInstance qp = generate_qp(6, 3, 4, 1.0);
  const auto set = qp.constraint_set();
  Rng rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector dir = uniform_point(6, rng, -1.0, 1.0).normalized();
    double previous = 0.0;
    for (double s = 0.5; s <= 10.0; s += 0.5) {
      const double kappa = restore_feasibility(s * dir, *set).kappa;
      CHECK(kappa >= previous - 1e-15);
      previous = kappa;
    }
  }
}

TEST_CASE("restoring wrapper") {
  const Vector a = (Vector(2) << 1.0, 1.0).finished();
  const NonsmoothPart h = IndicatorOfSet{make_set(
      2, 20.0, {ConvexConstraint::halfspace(a, 1.0)}, Vector::Zero(2))};
  SUBCASE("feasible base output passes through") {
    const ProxQuery query(h, (Vector(2) << -1.0, 0.5).finished(), 1.0);
    const ApproxProxResult base = apd_solve(query, Vector::Zero(2), 50);
    REQUIRE(base.infeasibility == 0.0);
    const ApproxProxResult r = solve_with_restoration(query, Vector::Zero(2), 50);
    CHECK(r.point == base.point);
    CHECK(r.rho == base.rho);
    CHECK(r.kappa == 0.0);
  }
  SUBCASE("restored halfspace gap is within its certified bound") {
    const Vector y = (Vector(2) << 5.0, 4.0).finished();
    const Vector exact = halfspace_projection(y, a, 1.0);
    for (double gamma : {0.2, 1.0, 5.0}) {
      const ProxQuery query(h, y, gamma);
      const ApproxProxResult r = solve_with_restoration(query, Vector::Zero(2), 200);
      CHECK(r.infeasibility == 0.0);
      const double gap = query.objective(r.point) - query.objective(exact);
      CHECK(gap <= r.rho + 1e-12);
      CHECK(std::isfinite(r.rho));
    }
  }
  SUBCASE("budget 1 from far away is still feasible") {
    const ProxQuery query(h, (Vector(2) << 19.0, 19.0).finished(), 3.0);
    const ApproxProxResult r =
        solve_with_restoration(query, (Vector(2) << 20.0, -20.0).finished(), 1);
    CHECK(r.infeasibility == 0.0);
    CHECK(query.constraint_set()->contains(r.point));
  }
}

TEST_CASE("restored battery gaps stay within three times the base gap bound") {
  const auto battery = projection_battery(20, 7);
  for (const auto& inst : battery) {
    if (inst.kind != "halfspace") continue;
    const ProxQuery query(inst.nonsmooth, inst.center, inst.gamma);
    const ApproxProxResult base = apd_solve(query, inst.initial, 200);
    const ApproxProxResult r = solve_with_restoration(query, inst.initial, 200);
    const double gap = query.objective(r.point) - query.objective(inst.solution);
    // The base bound in objective units, from the declared distance rate.
    const double base_bound = base.distance_bound / (2.0 * inst.gamma) + base.suboptimality;
    CHECK(gap <= 3.0 * base_bound + 1e-12);
  }
}

TEST_CASE("declared constants cover the calibration battery") {
  const PrimalDualSolver solver;
  const auto battery = projection_battery(20, 11);
  const std::vector<int> ts{25, 50, 100, 200, 400, 800};
  const RateConstants c = calibrate_rate_constants(solver, battery, ts);
  CHECK(c.a1 > 0.0);
  CHECK(c.a1 <= kPrimalDualRateConstants.a1);
  CHECK(c.a2 <= kPrimalDualRateConstants.a2);
}

TEST_CASE("IPAG with the exact adapter matches IPAG with a high-budget primal-dual solver") {
  const AnalyticProblem fixture = battery_problem("convex_box", 0.5);
  const CompositeProblem& problem = fixture.problem;
  constexpr int kHorizon = 30;
  const Vector x0 = (Vector(4) << 9.0, -9.0, 5.0, 0.0).finished();
  // Fixed budget of 10^4 per prox step.
  const StepSchedule fixed(problem.constants.L,
                           [] { std::vector<double> a; for (int k = 1; k <= kHorizon; ++k) a.push_back(2.0 / (k + 1)); return a; }(),
                           [&] { std::vector<double> g; for (int k = 1; k <= kHorizon; ++k) g.push_back(k / (4.0 * problem.constants.L)); return g; }(),
                           std::vector<double>(kHorizon, 1.0 / (2.0 * problem.constants.L)),
                           [] { std::vector<int> n; for (int k = 1; k <= kHorizon; ++k) n.push_back(k + 1); return n; }(),
                           std::vector<int>(kHorizon, 10000), std::vector<int>(kHorizon, 10000));
  Rng rng_a(5), rng_b(5);
  const IpagTrace exact =
      run_composite(problem, fixed, ExactProjectionSolver{}, x0, std::nullopt, kHorizon, rng_a);
  const IpagTrace apd =
      run_composite(problem, fixed, PrimalDualSolver{}, x0, std::nullopt, kHorizon, rng_b);
  REQUIRE(exact.records.size() == apd.records.size());
  for (std::size_t i = 0; i < exact.records.size(); ++i) {
    CHECK((exact.records[i].x - apd.records[i].x).norm() <= 1e-6);
    CHECK((exact.records[i].y - apd.records[i].y).norm() <= 1e-6);
    CHECK((exact.records[i].z - apd.records[i].z).norm() <= 1e-6);
  }
}
