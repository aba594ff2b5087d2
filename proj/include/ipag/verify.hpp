#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ipag/inner_solver.hpp"
#include "ipag/ipag.hpp"
#include "ipag/model.hpp"
#include "ipag/problems.hpp"

namespace ipag {

struct StationarityReport {
  double residual_sq = 0.0;  // ||z - P(z - lambda grad f(z))||^2
  double lambda_used = 0.0;
  /// Certified prox gap of the projection used (0 for analytic projections).
  double projection_accuracy = 0.0;
  double first_order_ball_radius = 0.0;  // 3 L sqrt(residual_sq)
  bool analytic_projection = false;
  Vector projection;
};

inline constexpr int kReferenceInnerBudget = 10000;

/**
 * Projected-gradient stationarity residual at z. lambda defaults to 1/(2L).
 * Uses the analytic projection when the set admits one, else the
 * primal-dual solver with restoration at `budget` iterations. Problems
 * without an exact gradient fall back to a 10^4-sample oracle average.
 */
StationarityReport stationarity_residual(const CompositeProblem& problem,
                                         const Vector& z,
                                         std::optional<double> lambda = std::nullopt,
                                         int budget = kReferenceInnerBudget);

/// Grid search for the prox point of an indicator over a box of dimension
/// <= 3: a coarse pass over the box, then windows refined by 4x around the
/// incumbent down to `grid_step`.
Vector brute_force_prox(const ProxQuery& query, double grid_step);

/// Max over points and coordinates of |fd - grad| / max(1, |grad|) with
/// central differences of width 2 * step.
double finite_diff_check(const std::function<Vector(const Vector&)>& gradient,
                         const std::function<double(const Vector&)>& value,
                         std::span<const Vector> points, double step);

/// Least-squares slope of log(value) against log(t), ignoring values at or
/// below `floor`. Returns -inf when fewer than two points remain (the
/// sequence reached roundoff).
double loglog_slope(std::span<const double> ts, std::span<const double> values,
                    double floor = 1e-24);

/// max over instances and t of t^2 ||u_t - u*||^2 / (||u0 - u*||^2 + 1),
/// returned as a1 = a2.
RateConstants calibrate_rate_constants(const InnerSolver& solver,
                                       std::span<const ProjectionInstance> battery,
                                       std::span<const int> iterations);

/// Per-step result of auditing a trace against brute-force prox references.
struct ProxAuditEntry {
  int k = 0;
  char step = 'x';            // 'x' or 'y'
  double claimed = 0.0;       // e_k or rho_k
  double measured_gap = 0.0;  // against the brute-force reference
  bool gap_ok = false;
  bool certificate_ok = false;
  double certificate_norm_sq = 0.0;  // ||v||^2
};

struct ProxAudit {
  std::vector<ProxAuditEntry> entries;
  bool all_ok() const;
};

/**
 * Re-solves every prox step of a trace on a grid (dimension <= 3) and checks
 * gap <= claimed + slack, then builds and probe-checks the rho-subgradient
 * certificate. The certificate reference is the better of the grid point and
 * a high-budget restored primal-dual solve.
 */
ProxAudit audit_prox_steps(const CompositeProblem& problem,
                           const StepSchedule& schedule,
                           const IpagTrace& trace, double grid_step,
                           double slack);

}  // namespace ipag
