#include "ipag/inner_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ipag/error.hpp"

namespace ipag {

namespace {

constexpr std::uint64_t kSamplingSeed = 0x9e3779b97f4a7c15ULL;

const ConstraintSet& require_set(const ProxQuery& query) {
  const ConstraintSet* set = query.constraint_set();
  if (set == nullptr) {
    throw Error(ErrorCode::kUnsupportedSet,
                "primal-dual solver needs an indicator of a constraint set");
  }
  if (query.center().size() != set->dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "prox center dimension");
  }
  return *set;
}

/// Box intersected with a Euclidean ball; the primal iterates live here.
struct LocalRegion {
  Vector lower;
  Vector upper;
  Vector center;
  double radius = 0.0;

  Vector clamp(const Vector& v) const {
    return v.cwiseMax(lower).cwiseMin(upper);
  }

  /// Euclidean projection: u(nu) = clamp((v + nu c) / (1 + nu)) with the
  /// smallest nu >= 0 that puts u inside the ball, found by bisection.
  Vector project(const Vector& v) const {
    Vector u = clamp(v);
    if ((u - center).norm() <= radius) return u;
    auto at = [&](double nu) { return clamp((v + nu * center) / (1.0 + nu)); };
    double lo = 0.0;
    double hi = 1.0;
    while ((at(hi) - center).norm() > radius && hi < 1e300) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      ((at(mid) - center).norm() > radius ? lo : hi) = mid;
    }
    return at(hi);
  }
};

/// The projection u* of y onto Theta satisfies <y - u*, p - u*> <= 0 for any
/// feasible p, so it lies in the ball with diameter [y, p]. The closest of a
/// few cheap feasible points is used as p.
LocalRegion localize(const ProxQuery& query, const ConstraintSet& set,
                     const Vector& u0) {
  const Vector& y = query.center();
  Vector anchor = set.slater_point();
  auto consider = [&](const Vector& p) {
    if ((p - y).squaredNorm() < (anchor - y).squaredNorm()) anchor = p;
  };
  consider(restore_feasibility(y, set).feasible_point);
  if (set.contains(u0)) consider(u0);

  LocalRegion region;
  region.center = 0.5 * (y + anchor);
  region.radius = 0.5 * (y - anchor).norm();
  region.lower = set.lower().array().max(region.center.array() - region.radius);
  region.upper = set.upper().array().min(region.center.array() + region.radius);
  // The anchor is in both sets; guard the box against rounding.
  region.lower = region.lower.cwiseMin(anchor);
  region.upper = region.upper.cwiseMax(anchor);
  return region;
}

double jacobian_bound_on(const std::vector<ConvexConstraint>& constraints,
                         const std::vector<Vector>& points, double safety) {
  double sum_sq = 0.0;
  for (const auto& c : constraints) {
    double best = 0.0;
    for (const auto& p : points) best = std::max(best, c.gradient(p).norm());
    sum_sq += best * best;
  }
  return safety * std::sqrt(sum_sq);
}

}  // namespace

double sampled_jacobian_bound(const ConstraintSet& constraint_set,
                              const Vector& lower, const Vector& upper,
                              int random_samples, double safety) {
  const auto& constraints = constraint_set.constraints();
  if (constraints.empty()) return 0.0;

  std::vector<Vector> points;
  points.push_back(lower);
  points.push_back(upper);
  points.push_back(0.5 * (lower + upper));
  points.push_back(
      constraint_set.slater_point().cwiseMax(lower).cwiseMin(upper));

  Rng rng(kSamplingSeed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto n = lower.size();
  for (int s = 0; s < random_samples; ++s) {
    Vector p(n);
    const bool vertex = (s % 2 == 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = unit(rng);
      p[i] = vertex ? (r < 0.5 ? lower[i] : upper[i])
                    : lower[i] + r * (upper[i] - lower[i]);
    }
    points.push_back(std::move(p));
  }
  return jacobian_bound_on(constraints, points, safety);
}

namespace {

/// Same estimate restricted to a local region: fixed points plus sphere and
/// interior samples, each projected into the region.
/// argmin_{w >= 0} ||jac w - target||^2 by cyclic coordinate descent.
Vector kkt_multipliers(const Matrix& jac, const Vector& target) {
  constexpr int kSweeps = 100;
  const Eigen::Index m = jac.cols();
  const Matrix gram = jac.transpose() * jac;
  const Vector rhs = jac.transpose() * target;
  Vector w = Vector::Zero(m);
  for (int sweep = 0; sweep < kSweeps; ++sweep) {
    for (Eigen::Index i = 0; i < m; ++i) {
      if (gram(i, i) <= 0.0) continue;
      const double residual = rhs[i] - gram.row(i).dot(w);
      w[i] = std::max(0.0, w[i] + residual / gram(i, i));
    }
  }
  return w;
}

double region_jacobian_bound(const ConstraintSet& set,
                             const LocalRegion& region, int random_samples,
                             double safety) {
  std::vector<Vector> points;
  points.push_back(region.project(region.center));
  points.push_back(region.project(region.lower));
  points.push_back(region.project(region.upper));
  Rng rng(kSamplingSeed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto n = region.center.size();
  for (int s = 0; s < random_samples; ++s) {
    Vector dir(n);
    for (Eigen::Index i = 0; i < n; ++i) dir[i] = normal(rng);
    const double scale = (s % 2 == 0) ? 1.0 : unit(rng);
    points.push_back(region.project(region.center +
                                    scale * region.radius * dir.normalized()));
  }
  return jacobian_bound_on(set.constraints(), points, safety);
}

}  // namespace

ApproxProxResult apd_solve(const ProxQuery& query, const Vector& u0,
                           int budget, const PrimalDualOptions& options) {
  if (budget < 1) {
    throw Error(ErrorCode::kBudgetZero, "inner budget must be >= 1");
  }
  const ConstraintSet& set = require_set(query);
  if (u0.size() != set.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "initial point dimension");
  }
  const auto& constraints = set.constraints();
  const auto m = static_cast<Eigen::Index>(constraints.size());
  const Vector& y = query.center();
  const double gamma = query.gamma();
  const double mu = 1.0 / gamma;

  const LocalRegion region = localize(query, set, u0);
  ApproxProxResult out;
  Vector u = region.project(u0);
  const double initial_reach = (u0 - region.center).norm() + region.radius;

  double tau = options.initial_step_ratio * gamma;
  double sigma = 0.0;
  std::int64_t evals = 3 * m;  // localisation
  if (m > 0) {
    const double bound = region_jacobian_bound(
        set, region, options.gradient_samples, options.gradient_safety);
    evals += m * (3 + options.gradient_samples);
    sigma = bound > 0.0 ? 1.0 / (tau * bound * bound) : 0.0;
  }

  Vector w = Vector::Zero(m);
  Vector u_bar = u;
  Vector curvature(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    curvature[i] = constraints[static_cast<std::size_t>(i)].curvature();
  }

  for (int t = 0; t < budget; ++t) {
    Vector direction = Vector::Zero(u.size());
    double weight = 0.0;
    if (m > 0) {
      for (Eigen::Index i = 0; i < m; ++i) {
        const auto& c = constraints[static_cast<std::size_t>(i)];
        double wi = w[i] + sigma * c.value(u_bar);
        if (wi > options.dual_cap) {
          wi = options.dual_cap;
          out.dual_clipped = true;
        }
        w[i] = std::max(0.0, wi);
      }
      for (Eigen::Index i = 0; i < m; ++i) {
        if (w[i] == 0.0) continue;
        direction += w[i] * constraints[static_cast<std::size_t>(i)].gradient(u);
      }
      weight = w.dot(curvature);
      evals += 2 * m;
    }
    // Majorised Lagrangian step: the curvature term keeps the linearised
    // constraint part an upper model for any step size. Without functional
    // constraints nothing couples the step sizes and the step is exact.
    const double inv_tau = m > 0 ? 1.0 / tau : 0.0;
    const Vector next = region.project(((inv_tau + weight) * u + mu * y - direction) /
                                       (inv_tau + weight + mu));
    const double theta = 1.0 / std::sqrt(1.0 + 2.0 * mu * tau);
    tau *= theta;
    sigma /= theta;
    u_bar = next + theta * (next - u);
    u = next;
  }

  out.point = u;
  out.inner_iters = budget;
  out.infeasibility = set.max_violation(u);

  // Dual lower bound: linearise the constraints at u (valid by convexity)
  // and minimise the resulting model over the local region, which contains
  // the subproblem's minimiser. Any w >= 0 gives a valid bound, so the
  // iterate's multipliers and a KKT fit at u are both tried.
  Matrix jac(u.size(), m);
  Vector phi(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& c = constraints[static_cast<std::size_t>(i)];
    jac.col(i) = c.gradient(u);
    phi[i] = c.value(u);
  }
  evals += 2 * m;
  auto dual_bound = [&](const Vector& mult) {
    const Vector lin_grad = jac * mult;
    const double lin_const = mult.dot(phi - jac.transpose() * u);
    const Vector model_min = region.project(y - gamma * lin_grad);
    return query.distance_term(model_min) + lin_grad.dot(model_min) + lin_const;
  };
  const double lower_bound =
      m > 0 ? std::max(dual_bound(w), dual_bound(kkt_multipliers(jac, (y - u) / gamma)))
            : dual_bound(Vector::Zero(0));
  const double primal = query.distance_term(u);
  out.suboptimality = std::max(0.0, primal - lower_bound);
  out.constraint_evals = evals;

  const double declared =
      options.rate.bound(initial_reach * initial_reach, budget);
  if (out.infeasibility == 0.0) {
    out.rho = out.suboptimality;
    out.distance_bound = std::min(declared, 2.0 * gamma * out.rho);
  } else {
    out.rho = std::numeric_limits<double>::infinity();
    out.distance_bound = declared;
  }
  return out;
}

bool has_exact_projection(const ProxQuery& query) {
  try {
    exact_projection_adapter(query, query.center(), 1);
    return true;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kUnsupportedSet) return false;
    throw;
  }
}

ApproxProxResult exact_projection_adapter(const ProxQuery& query,
                                          const Vector& /*u0*/,
                                          int /*budget*/) {
  ApproxProxResult out;
  const Vector& y = query.center();
  if (const auto* generic = std::get_if<GenericProx>(&query.nonsmooth())) {
    out.point = generic->prox(y, query.gamma());
    return out;
  }
  const ConstraintSet& set = *query.constraint_set();
  if (y.size() != set.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "prox center dimension");
  }
  if (set.box_only()) {
    out.point = prox_box(y, query.gamma(), set.lower(), set.upper());
    return out;
  }
  if (set.constraints().size() == 1) {
    const auto& shape = set.constraints().front().shape();
    std::optional<Vector> projected;
    if (const auto* ball = std::get_if<ConvexConstraint::Ball>(&shape)) {
      projected = prox_ball(y, query.gamma(), ball->radius);
    } else if (const auto* half =
                   std::get_if<ConvexConstraint::Halfspace>(&shape)) {
      const double excess = std::max(0.0, half->normal.dot(y) - half->offset);
      projected = y - (excess / half->normal.squaredNorm()) * half->normal;
    }
    // The projection onto the superset {phi <= 0} is the projection onto
    // Theta whenever it already lies in the box.
    if (projected && set.in_box(*projected)) {
      out.point = std::move(*projected);
      out.constraint_evals = 1;
      return out;
    }
  }
  throw Error(ErrorCode::kUnsupportedSet,
              "constraint set has no analytic projection");
}

RestorationResult restore_feasibility(const Vector& candidate,
                                      const ConstraintSet& constraint_set) {
  constraint_set.check_slater();
  if (candidate.size() != constraint_set.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "candidate dimension");
  }
  const Vector& anchor = constraint_set.slater_point();
  const Vector x_hat = constraint_set.clamp(candidate);
  const Vector at_candidate = constraint_set.constraint_values(x_hat);
  const Vector at_anchor = constraint_set.constraint_values(anchor);

  RestorationResult out;
  for (Eigen::Index i = 0; i < at_candidate.size(); ++i) {
    const double excess = std::max(0.0, at_candidate[i]);
    out.max_violation_before = std::max(out.max_violation_before, excess);
    if (excess > 0.0) {
      out.kappa = std::max(out.kappa, excess / (excess - at_anchor[i]));
    }
  }
  if (out.kappa == 0.0) {
    out.feasible_point = x_hat;
    return out;
  }

  auto combine = [&](double kappa) {
    return constraint_set.clamp(x_hat + kappa * (anchor - x_hat));
  };
  out.feasible_point = combine(out.kappa);
  // Rounding can leave the active constraint a few ulps above zero; nudge
  // kappa toward one until the evaluated point is feasible.
  const double base = out.kappa;
  for (int j = 0; constraint_set.max_constraint(out.feasible_point) > 0.0; ++j) {
    if (j > 50) {
      out.kappa = 1.0;
      out.feasible_point = anchor;
      break;
    }
    out.kappa = base + (1.0 - base) * std::ldexp(1.0, j - 50);
    out.feasible_point = combine(out.kappa);
  }
  return out;
}

ApproxProxResult solve_with_restoration(const ProxQuery& query,
                                        const Vector& u0, int budget,
                                        const InnerSolver& base) {
  ApproxProxResult result = base.solve(query, u0, budget);
  const ConstraintSet* set = query.constraint_set();
  if (set == nullptr) return result;

  const RestorationResult restored = restore_feasibility(result.point, *set);
  if (restored.kappa == 0.0 && restored.feasible_point == result.point) {
    return result;
  }

  const Vector& y = query.center();
  const double gamma = query.gamma();
  const double kappa = restored.kappa;
  const double eps = result.suboptimality;
  const double anchor_dist = (set->slater_point() - y).norm();
  const double candidate_dist = (result.point - y).norm();
  // P(xhat) - eps is a lower bound on the subproblem optimum.
  const double lower_bound = query.distance_term(result.point) - eps;

  result.rho = kappa * kappa * anchor_dist * anchor_dist / (2.0 * gamma) +
               kappa * (1.0 - kappa) * anchor_dist * candidate_dist / gamma +
               eps;
  result.point = restored.feasible_point;
  result.kappa = kappa;
  result.distance_bound = 2.0 * gamma * result.rho;
  result.suboptimality =
      std::max(0.0, query.distance_term(result.point) - lower_bound);
  result.infeasibility = set->max_violation(result.point);
  result.constraint_evals += 3 * static_cast<std::int64_t>(set->constraints().size());
  return result;
}

ApproxProxResult solve_with_restoration(const ProxQuery& query,
                                        const Vector& u0, int budget) {
  return solve_with_restoration(query, u0, budget, PrimalDualSolver{});
}

}  // namespace ipag
