#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "ipag/types.hpp"

namespace ipag {

/**
 * Smooth, possibly nonconvex part f of the objective.
 *
 * `gradient` is the exact (deterministic) gradient. It may be left empty
 * for problems where only sampled gradients exist; diagnostics that need
 * the exact gradient then report nothing.
 */
struct SmoothObjective {
  int dim = 0;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  double lipschitz = 0.0;       // L
  double weak_convexity = 0.0;  // ell

  bool has_exact_gradient() const { return static_cast<bool>(gradient); }
};

/// Stochastic first-order oracle returning minibatch averages of grad F(x, w).
class StochasticGradientOracle {
 public:
  virtual ~StochasticGradientOracle() = default;

  virtual int dim() const = 0;

  /// (1/N) sum_j grad F(x, w_j) with w_j drawn i.i.d. from `rng`.
  virtual Vector sample(const Vector& x, int batch, Rng& rng) const = 0;

  /// tau^2 such that E||xi_bar||^2 <= tau^2 / N.
  virtual double variance_bound() const = 0;
};

/// grad F(x, w) = grad f(x) + w with w ~ N(0, sigma^2 I).
class AdditiveNoiseOracle final : public StochasticGradientOracle {
 public:
  AdditiveNoiseOracle(std::function<Vector(const Vector&)> gradient, int dim,
                      double noise_std);

  int dim() const override { return dim_; }
  Vector sample(const Vector& x, int batch, Rng& rng) const override;
  double variance_bound() const override;
  double noise_std() const { return noise_std_; }

 private:
  std::function<Vector(const Vector&)> gradient_;
  int dim_;
  double noise_std_;
};

/**
 * A smooth convex constraint function phi(u) <= 0.
 *
 * The closed-form shapes are kept as tagged data so that solvers can
 * recognise sets with analytic projections and use exact curvature bounds.
 */
class ConvexConstraint {
 public:
  /// ||u||^2 - r^2
  struct Ball {
    double radius;
  };
  /// <a, u> - b
  struct Halfspace {
    Vector normal;
    double offset;
  };
  /// 0.5 u'Qu + d'u - c, Q symmetric PSD
  struct Quadratic {
    Matrix Q;
    Vector d;
    double c;
  };
  struct Generic {
    std::function<double(const Vector&)> value;
    std::function<Vector(const Vector&)> gradient;
  };
  using Shape = std::variant<Ball, Halfspace, Quadratic, Generic>;

  static ConvexConstraint ball(double radius);
  static ConvexConstraint halfspace(Vector normal, double offset);
  static ConvexConstraint quadratic(Matrix Q, Vector d, double c);
  /// `curvature` must bound the Lipschitz constant of `gradient`.
  static ConvexConstraint generic(std::function<double(const Vector&)> value,
                                  std::function<Vector(const Vector&)> gradient,
                                  double curvature);

  double value(const Vector& u) const;
  Vector gradient(const Vector& u) const;

  /// Lipschitz constant of the gradient.
  double curvature() const { return curvature_; }

  /// Dimension the constraint is tied to, or nullopt for dimension-free shapes.
  std::optional<int> dim() const;

  const Shape& shape() const { return shape_; }

 private:
  ConvexConstraint(Shape shape, double curvature)
      : shape_(std::move(shape)), curvature_(curvature) {}

  Shape shape_;
  double curvature_;
};

/// Theta = { x in [lower, upper] : phi_i(x) <= 0 for all i } with a Slater point.
class ConstraintSet {
 public:
  ConstraintSet(Vector lower, Vector upper,
                std::vector<ConvexConstraint> constraints, Vector slater_point);

  int dim() const { return static_cast<int>(lower_.size()); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  const Vector& slater_point() const { return slater_point_; }
  const std::vector<ConvexConstraint>& constraints() const {
    return constraints_;
  }
  bool box_only() const { return constraints_.empty(); }

  Vector clamp(const Vector& x) const;
  bool in_box(const Vector& x, double tol = 0.0) const;

  /// phi_i(x) for every constraint.
  Vector constraint_values(const Vector& x) const;

  /// max_i phi_i(x); -inf when there are no functional constraints.
  double max_constraint(const Vector& x) const;

  /// max(box violation, max_i [phi_i(x)]_+).
  double max_violation(const Vector& x) const;

  bool contains(const Vector& x, double tol = 0.0) const;

  /// min_i -phi_i(slater); +inf without functional constraints.
  double slater_margin() const;

  /// Throws SlaterViolation unless the Slater point is strictly feasible.
  void check_slater() const;

  double diameter() const { return (upper_ - lower_).norm(); }

 private:
  Vector lower_;
  Vector upper_;
  std::vector<ConvexConstraint> constraints_;
  Vector slater_point_;
};

struct IndicatorOfSet {
  std::shared_ptr<const ConstraintSet> set;
};

/// A convex h given only through its value and its exact prox.
struct GenericProx {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&, double)> prox;
};

using NonsmoothPart = std::variant<IndicatorOfSet, GenericProx>;

/// h(x); +inf outside the set for indicators.
double evaluate(const NonsmoothPart& h, const Vector& x);

struct AssumptionConstants {
  double L = 0.0;
  double ell = 0.0;
  double C = 0.0;  // prox-norm bound; reporting only
  double tau2 = 0.0;
};

/// g = f + h together with the sampled-gradient oracle for f.
struct CompositeProblem {
  SmoothObjective objective;
  std::shared_ptr<const StochasticGradientOracle> oracle;
  NonsmoothPart nonsmooth;
  AssumptionConstants constants;

  int dim() const { return objective.dim; }

  /// The constraint set when h is an indicator, else nullptr.
  const ConstraintSet* constraint_set() const;
};

/// Builds f + I_Theta. Throws SlaterViolation or DimensionMismatch.
CompositeProblem make_indicator_composite(
    SmoothObjective objective,
    std::shared_ptr<const StochasticGradientOracle> oracle,
    std::shared_ptr<const ConstraintSet> constraint_set);

struct MinibatchSample {
  Vector mean_gradient;  // g_bar
  /// grad f(z) - g_bar, present only when the exact gradient is known.
  std::optional<Vector> noise;
};

MinibatchSample sample_minibatch_grad(const CompositeProblem& problem,
                                      const Vector& z, int batch, Rng& rng);

}  // namespace ipag
