#pragma once

#include <cstdint>
#include <memory>
#include <string_view>

#include "ipag/prox.hpp"

namespace ipag {

/// Declared constants of the ||u_t - u*||^2 <= (a1 ||u0 - u*||^2 + a2) / t^2 contract.
struct RateConstants {
  double a1 = 0.0;
  double a2 = 0.0;

  double bound(double initial_distance_sq, int iterations) const {
    const double t = static_cast<double>(iterations);
    return (a1 * initial_distance_sq + a2) / (t * t);
  }
};

/// Calibrated on the seeded halfspace/ball projection battery; see
/// calibrate_rate_constants and the inner-solver tests.
inline constexpr RateConstants kPrimalDualRateConstants{1.0, 1.0};

struct PrimalDualOptions {
  double dual_cap = 1e8;
  /// mu * tau_0 where mu = 1/gamma is the strong convexity of the subproblem.
  double initial_step_ratio = 100.0;
  /// Random samples (plus fixed points) used to bound ||grad phi|| on the
  /// region the primal iterates are confined to.
  int gradient_samples = 64;
  double gradient_safety = 2.0;
  RateConstants rate = kPrimalDualRateConstants;
};

/**
 * Fixed-step accelerated primal-dual method for the projection subproblem
 *
 *   min_{u in X} ||u - y||^2 / (2 gamma)  s.t.  phi_i(u) <= 0,
 *
 * run on the Lagrangian with multipliers w >= 0. Each iteration takes a
 * projected dual ascent step at the extrapolated primal point and a
 * projected primal step, then shrinks the primal step and extrapolates
 * using the strong-convexity modulus 1/gamma.
 *
 * Primal iterates are confined to X intersected with the ball whose diameter
 * joins y to the nearest of a few known feasible points; the minimiser always
 * lies there. The constraint Jacobian bound is sampled over that region.
 *
 * Runs exactly `budget` iterations and returns the last primal iterate,
 * which lies in X but may violate the functional constraints.
 */
ApproxProxResult apd_solve(const ProxQuery& query, const Vector& u0,
                           int budget, const PrimalDualOptions& options = {});

/// Zero-error solver for sets with an analytic projection (box, or a box
/// containing the projection onto a single ball/halfspace) and for generic
/// prox handles. Throws UnsupportedSet otherwise.
ApproxProxResult exact_projection_adapter(const ProxQuery& query,
                                          const Vector& u0, int budget);

bool has_exact_projection(const ProxQuery& query);

struct RestorationResult {
  Vector feasible_point;
  double kappa = 0.0;
  double max_violation_before = 0.0;
};

/// Convex combination with the Slater point that removes every violation.
RestorationResult restore_feasibility(const Vector& candidate,
                                      const ConstraintSet& constraint_set);

/// Interface every inner prox solver implements.
class InnerSolver {
 public:
  virtual ~InnerSolver() = default;

  virtual ApproxProxResult solve(const ProxQuery& query, const Vector& u0,
                                 int budget) const = 0;

  virtual std::string_view name() const = 0;
};

class PrimalDualSolver final : public InnerSolver {
 public:
  explicit PrimalDualSolver(PrimalDualOptions options = {})
      : options_(options) {}

  ApproxProxResult solve(const ProxQuery& query, const Vector& u0,
                         int budget) const override {
    return apd_solve(query, u0, budget, options_);
  }
  std::string_view name() const override { return "apd"; }
  const PrimalDualOptions& options() const { return options_; }

 private:
  PrimalDualOptions options_;
};

class ExactProjectionSolver final : public InnerSolver {
 public:
  ApproxProxResult solve(const ProxQuery& query, const Vector& u0,
                         int budget) const override {
    return exact_projection_adapter(query, u0, budget);
  }
  std::string_view name() const override { return "exact"; }
};

/// Runs `base`, then restores feasibility. rho is inflated by the bound
///
///   kappa^2 ||x0 - y||^2 / (2 gamma)
///     + kappa (1 - kappa) ||x0 - y|| ||xhat - y|| / gamma + eps,
///
/// where x0 is the Slater point, xhat the base output and eps the base
/// output's certified suboptimality. The returned point is always feasible.
ApproxProxResult solve_with_restoration(const ProxQuery& query,
                                        const Vector& u0, int budget,
                                        const InnerSolver& base);

/// Convenience overload using the primal-dual solver as the base.
ApproxProxResult solve_with_restoration(const ProxQuery& query,
                                        const Vector& u0, int budget);

class RestoringSolver final : public InnerSolver {
 public:
  explicit RestoringSolver(std::shared_ptr<const InnerSolver> base)
      : base_(std::move(base)) {}

  ApproxProxResult solve(const ProxQuery& query, const Vector& u0,
                         int budget) const override {
    return solve_with_restoration(query, u0, budget, *base_);
  }
  std::string_view name() const override { return "restored"; }
  const InnerSolver& base() const { return *base_; }

 private:
  std::shared_ptr<const InnerSolver> base_;
};

/// Sampled bound on the constraint Jacobian norm over the box [lower, upper]
/// (Frobenius norm of the per-constraint maxima, times `safety`).
double sampled_jacobian_bound(const ConstraintSet& constraint_set,
                              const Vector& lower, const Vector& upper,
                              int random_samples, double safety);

}  // namespace ipag
