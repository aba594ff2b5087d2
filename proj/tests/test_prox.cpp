#include <doctest.h>

#include <cmath>
#include <memory>

#include "ipag/error.hpp"
#include "ipag/prox.hpp"

using namespace ipag;

namespace {

NonsmoothPart box_indicator(int n, double half_width) {
  return IndicatorOfSet{std::make_shared<const ConstraintSet>(
      Vector::Constant(n, -half_width), Vector::Constant(n, half_width),
      std::vector<ConvexConstraint>{}, Vector::Zero(n))};
}

Vector vec2(double a, double b) { return (Vector(2) << a, b).finished(); }

}  // namespace

TEST_CASE("box prox clamps and ignores gamma") {
  const Vector lo = Vector::Constant(2, -10.0), hi = Vector::Constant(2, 10.0);
  CHECK(prox_box(vec2(12, -3), 1.0, lo, hi) == vec2(10, -3));
  CHECK(prox_box(vec2(4, -3), 1.0, lo, hi) == vec2(4, -3));
  for (double gamma : {1e-3, 0.1, 1.0, 10.0, 1e3}) {
    CHECK(prox_box(vec2(11, 11), gamma, lo, hi) == vec2(10, 10));
  }
  CHECK_THROWS_AS(prox_box(Vector::Zero(3), 1.0, lo, hi), Error);
}

TEST_CASE("ball prox is the radial projection") {
  CHECK(prox_ball(vec2(3, 4), 1.0, 5.0) == vec2(3, 4));
  CHECK((prox_ball(vec2(6, 8), 1.0, 5.0) - vec2(3, 4)).norm() <= 1e-15);
  CHECK(prox_ball(Vector::Zero(2), 1.0, 2.0) == Vector::Zero(2));
  for (double gamma : {1e-3, 1.0, 1e3}) {
    CHECK(prox_ball(vec2(6, 8), gamma, 5.0) == prox_ball(vec2(6, 8), 1.0, 5.0));
  }
}

TEST_CASE("exact proxes are nonexpansive") {
  Rng rng(11);
  std::normal_distribution<double> g(0.0, 6.0);
  const Vector lo = Vector::Constant(3, -2.0), hi = Vector::Constant(3, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const Vector a = Vector::NullaryExpr(3, [&] { return g(rng); });
    const Vector b = Vector::NullaryExpr(3, [&] { return g(rng); });
    CHECK((prox_box(a, 1.0, lo, hi) - prox_box(b, 1.0, lo, hi)).norm() <= (a - b).norm() + 1e-12);
    CHECK((prox_ball(a, 1.0, 4.0) - prox_ball(b, 1.0, 4.0)).norm() <= (a - b).norm() + 1e-12);
  }
}

TEST_CASE("prox accuracy gap matches the closed-form quadratic difference") {
  const NonsmoothPart h = box_indicator(2, 10.0);
  const Vector y = vec2(12.0, -3.0);
  const ProxQuery query(h, y, 1.0);
  const Vector exact = vec2(10.0, -3.0);

  ApproxProxResult same{exact};
  const ProxAccuracy zero = check_prox_accuracy(same, query, exact);
  CHECK(zero.measured_gap == 0.0);
  CHECK(zero.satisfied);

  ApproxProxResult shifted{vec2(9.9, -3.0)};
  const double gap = ((shifted.point - y).squaredNorm() - (exact - y).squaredNorm()) / 2.0;
  shifted.rho = gap;
  const ProxAccuracy at = check_prox_accuracy(shifted, query, exact);
  CHECK(at.measured_gap == doctest::Approx(gap).epsilon(1e-12));
  CHECK(at.satisfied);
  shifted.rho = 0.5 * gap;
  CHECK_FALSE(check_prox_accuracy(shifted, query, exact).satisfied);

  ApproxProxResult outside{vec2(10.5, -3.0), 1e6};
  const ProxAccuracy bad = check_prox_accuracy(outside, query, exact);
  CHECK(bad.infeasible_candidate);
  CHECK_FALSE(bad.satisfied);
  CHECK(std::isinf(bad.measured_gap));
}

TEST_CASE("certificate of an exact prox point has v = 0") {
  const NonsmoothPart h = box_indicator(2, 1.0);
  const Vector y = vec2(2.0, 0.5);
  const ProxQuery query(h, y, 0.5);
  const Vector exact = vec2(1.0, 0.5);
  const RhoSubgradientCertificate cert = make_certificate(exact, query, 0.0, exact);
  CHECK(cert.v.norm() == 0.0);
  CHECK((cert.d - (y - exact) / 0.5).norm() <= 1e-15);
}

TEST_CASE("certificate of a perturbed box prox passes the probes") {
  const NonsmoothPart h = box_indicator(2, 1.0);
  const Vector y = vec2(2.0, 0.5);
  const double gamma = 0.5;
  const ProxQuery query(h, y, gamma);
  const Vector exact = vec2(1.0, 0.5);
  const Vector candidate = vec2(0.97, 0.52);
  const double rho = query.objective(candidate) - query.objective(exact);
  REQUIRE(rho > 0.0);
  const RhoSubgradientCertificate cert = make_certificate(candidate, query, rho, exact);
  CHECK(cert.v.squaredNorm() <= 2.0 * gamma * rho + 1e-12);
  CHECK((cert.d - (y - candidate - cert.v) / gamma).norm() <= 1e-12);
  Rng rng(12);
  const auto probes = certificate_probes(query, candidate, 100, rng);
  CHECK(probes.size() == 100);
  CHECK(rho_subgradient_violation(cert, candidate, query, probes) <= 1e-12);
}

TEST_CASE("candidate ten times worse than claimed has no certificate") {
  const NonsmoothPart h = box_indicator(2, 1.0);
  const Vector y = vec2(0.2, 0.1);
  const double gamma = 1.0;
  const ProxQuery query(h, y, gamma);
  const double rho = 1e-3;
  // ||delta||^2 / (2 gamma) = 10 rho.
  const Vector delta = vec2(std::sqrt(20.0 * gamma * rho), 0.0);
  try {
    make_certificate(y + delta, query, rho, y);
    FAIL("expected CertificateUnavailable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kCertificateUnavailable);
  }
}

TEST_CASE("gamma recursion") {
  SUBCASE("alpha = 2/(k+1) gives 2/(k(k+1))") {
    std::vector<double> alphas;
    for (int k = 1; k <= 10000; ++k) alphas.push_back(2.0 / (k + 1.0));
    const auto G = gamma_recursion(alphas);
    CHECK(G[0] == 1.0);
    CHECK(G[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(G[2] == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
    CHECK(G[3] == doctest::Approx(1.0 / 10.0).epsilon(1e-15));
    double worst = 0.0;
    for (int k = 1; k <= 10000; ++k) {
      worst = std::max(worst, std::abs(G[static_cast<std::size_t>(k - 1)] - 2.0 / (k * (k + 1.0))));
    }
    CHECK(worst <= 1e-12);
  }
  SUBCASE("alpha = 1 collapses to zero") {
    const auto G = gamma_recursion(std::vector<double>(5, 1.0));
    CHECK(G[0] == 1.0);
    for (std::size_t k = 1; k < G.size(); ++k) CHECK(G[k] == 0.0);
  }
  SUBCASE("alpha = 1/2 is geometric") {
    const auto G = gamma_recursion(std::vector<double>(30, 0.5));
    for (std::size_t k = 0; k < G.size(); ++k) CHECK(G[k] == std::ldexp(1.0, -static_cast<int>(k)));
  }
  SUBCASE("alpha outside (0, 1] is rejected") {
    for (double bad : {0.0, -0.1, 1.5}) {
      try {
        gamma_recursion(std::vector<double>{1.0, bad});
        FAIL("expected InvalidAlpha");
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kInvalidAlpha);
      }
    }
  }
}
