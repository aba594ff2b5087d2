#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ipag/model.hpp"

namespace ipag {

/// How the diagonal of D is drawn.
enum class DiagonalSampling {
  kDiscreteUniform,  // integers 1..1000
  kTwoPoint,         // {1, 1000} with equal probability
};

struct QuadraticConstraintData {
  Matrix Q;
  Vector d;
  double c = 0.0;
};

/**
 * Stochastic nonconvex QP over the box [-10, 10]^n:
 *
 *   f(x) = -delta/2 ||D B x||^2 + tau_obj/2 E||A x - b - w||^2,
 *   0.5 x'Q_i x + d_i'x - c_i <= 0,
 *
 * with w ~ N(0, noise_std^2 I_p), p = n/2.
 */
struct QpInstance {
  int n = 0;
  int m = 0;
  int p = 0;
  Matrix A;       // p x n
  Matrix B;       // n x n
  Vector D;       // diagonal of D
  Vector b;       // p
  double delta = 0.0;
  double tau_obj = 0.0;
  double noise_std = 0.0;
  double box = 10.0;
  std::vector<QuadraticConstraintData> constraints;

  /// Cached from the data: DB, the Hessian and its spectral quantities.
  Matrix DB;
  Matrix hessian;
  double lipschitz = 0.0;        // largest |eigenvalue| of the Hessian
  double min_eigenvalue = 0.0;

  double value(const Vector& x) const;
  /// Monte Carlo estimate of E F(x, w): exact deterministic part plus the
  /// sample mean of tau_obj/2 ||A x - b - w_j||^2.
  double sampled_value(const Vector& x, int samples, Rng& rng) const;

  std::shared_ptr<const ConstraintSet> constraint_set() const;
};

/// Fills DB, the Hessian, the Lipschitz constant and lambda_min.
void finalize_qp(QpInstance& instance);

/// Seeded generator. Requires n even, n >= 4, m >= 1.
QpInstance generate_qp(int n, int m, std::uint64_t seed, double noise_std,
                       DiagonalSampling diagonal = DiagonalSampling::kDiscreteUniform);

/// Same construction for reduced audit instances (n even, n >= 2).
QpInstance generate_small_qp(int n, int m, std::uint64_t seed,
                             double noise_std);

Vector qp_full_gradient(const QpInstance& instance, const Vector& x);

Vector qp_stochastic_gradient(const QpInstance& instance, const Vector& x,
                              int batch, Rng& rng);

/// Oracle with b(w) = b + w.
class QpGradientOracle final : public StochasticGradientOracle {
 public:
  explicit QpGradientOracle(std::shared_ptr<const QpInstance> instance);

  int dim() const override { return instance_->n; }
  Vector sample(const Vector& x, int batch, Rng& rng) const override;
  /// tau_obj^2 sigma^2 trace(A'A).
  double variance_bound() const override;

 private:
  std::shared_ptr<const QpInstance> instance_;
};

/// f + I_Theta for the QP with Slater point 0.
CompositeProblem make_qp_problem(std::shared_ptr<const QpInstance> instance);

/// Text archive: dimension header, then row-major matrices in decimal.
void write_qp(const QpInstance& instance, std::ostream& out);
QpInstance read_qp(std::istream& in);

/// Ground-truth fixture with a known stationary set.
struct AnalyticProblem {
  std::string name;
  CompositeProblem problem;
  std::vector<Vector> stationary_points;
  bool convex = false;
};

/// "convex_box", "ball_projection" and "nonconvex_box".
std::vector<AnalyticProblem> analytic_battery(double noise_std = 0.0);

/// One battery member by name; throws InvalidArgument for unknown names.
AnalyticProblem battery_problem(std::string_view name, double noise_std = 0.0);

/// A projection subproblem with a closed-form answer.
struct ProjectionInstance {
  std::string kind;  // "halfspace" or "ball"
  NonsmoothPart nonsmooth;
  Vector center;
  double gamma = 1.0;
  Vector initial;
  Vector solution;

  const ConstraintSet& constraint_set() const;
};

/// Seeded battery of halfspace and ball projections (dim <= 20) inside a
/// box large enough to stay inactive.
std::vector<ProjectionInstance> projection_battery(int count,
                                                   std::uint64_t seed);

}  // namespace ipag
