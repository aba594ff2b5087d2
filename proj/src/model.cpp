#include "ipag/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "ipag/error.hpp"
#include "ipag/linalg.hpp"

namespace ipag {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kSlaterViolation: return "SlaterViolation";
    case ErrorCode::kInvalidAlpha: return "InvalidAlpha";
    case ErrorCode::kInvalidHorizon: return "InvalidHorizon";
    case ErrorCode::kDegenerateWeights: return "DegenerateWeights";
    case ErrorCode::kBudgetZero: return "BudgetZero";
    case ErrorCode::kUnsupportedSet: return "UnsupportedSet";
    case ErrorCode::kCertificateUnavailable: return "CertificateUnavailable";
    case ErrorCode::kNonFiniteIterate: return "NonFiniteIterate";
    case ErrorCode::kOddDimension: return "OddDimension";
    case ErrorCode::kDimensionTooLarge: return "DimensionTooLarge";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kValidationError: return "ValidationError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

AdditiveNoiseOracle::AdditiveNoiseOracle(
    std::function<Vector(const Vector&)> gradient, int dim, double noise_std)
    : gradient_(std::move(gradient)), dim_(dim), noise_std_(noise_std) {
  if (noise_std < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "noise_std must be nonnegative");
  }
}

Vector AdditiveNoiseOracle::sample(const Vector& x, int batch,
                                   Rng& rng) const {
  if (batch < 1) {
    throw Error(ErrorCode::kInvalidArgument, "batch size must be >= 1");
  }
  Vector g = gradient_(x);
  if (noise_std_ == 0.0) return g;
  std::normal_distribution<double> normal(0.0, noise_std_);
  Vector sum = Vector::Zero(dim_);
  for (int j = 0; j < batch; ++j) {
    for (int i = 0; i < dim_; ++i) sum[i] += normal(rng);
  }
  return g + sum / static_cast<double>(batch);
}

double AdditiveNoiseOracle::variance_bound() const {
  return static_cast<double>(dim_) * noise_std_ * noise_std_;
}

ConvexConstraint ConvexConstraint::ball(double radius) {
  if (!(radius > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "ball radius must be positive");
  }
  return ConvexConstraint(Ball{radius}, 2.0);
}

ConvexConstraint ConvexConstraint::halfspace(Vector normal, double offset) {
  if (normal.size() == 0 || normal.norm() == 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "halfspace normal must be nonzero");
  }
  return ConvexConstraint(Halfspace{std::move(normal), offset}, 0.0);
}

ConvexConstraint ConvexConstraint::quadratic(Matrix Q, Vector d, double c) {
  if (Q.rows() != Q.cols() || Q.rows() != d.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "quadratic constraint needs square Q matching d");
  }
  const double curvature = spectral_norm(Q);
  return ConvexConstraint(Quadratic{std::move(Q), std::move(d), c}, curvature);
}

ConvexConstraint ConvexConstraint::generic(
    std::function<double(const Vector&)> value,
    std::function<Vector(const Vector&)> gradient, double curvature) {
  if (curvature < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "curvature must be nonnegative");
  }
  return ConvexConstraint(Generic{std::move(value), std::move(gradient)},
                          curvature);
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

double ConvexConstraint::value(const Vector& u) const {
  return std::visit(
      Overloaded{
          [&](const Ball& s) { return u.squaredNorm() - s.radius * s.radius; },
          [&](const Halfspace& s) { return s.normal.dot(u) - s.offset; },
          [&](const Quadratic& s) {
            return 0.5 * u.dot(s.Q * u) + s.d.dot(u) - s.c;
          },
          [&](const Generic& s) { return s.value(u); }},
      shape_);
}

Vector ConvexConstraint::gradient(const Vector& u) const {
  return std::visit(
      Overloaded{[&](const Ball&) -> Vector { return 2.0 * u; },
                 [&](const Halfspace& s) -> Vector { return s.normal; },
                 [&](const Quadratic& s) -> Vector { return s.Q * u + s.d; },
                 [&](const Generic& s) -> Vector { return s.gradient(u); }},
      shape_);
}

std::optional<int> ConvexConstraint::dim() const {
  return std::visit(
      Overloaded{
          [](const Ball&) -> std::optional<int> { return std::nullopt; },
          [](const Halfspace& s) -> std::optional<int> {
            return static_cast<int>(s.normal.size());
          },
          [](const Quadratic& s) -> std::optional<int> {
            return static_cast<int>(s.d.size());
          },
          [](const Generic&) -> std::optional<int> { return std::nullopt; }},
      shape_);
}

ConstraintSet::ConstraintSet(Vector lower, Vector upper,
                             std::vector<ConvexConstraint> constraints,
                             Vector slater_point)
    : lower_(std::move(lower)),
      upper_(std::move(upper)),
      constraints_(std::move(constraints)),
      slater_point_(std::move(slater_point)) {
  if (lower_.size() == 0 || lower_.size() != upper_.size() ||
      lower_.size() != slater_point_.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "box bounds and slater point must share one dimension");
  }
  if ((lower_.array() > upper_.array()).any()) {
    throw Error(ErrorCode::kInvalidArgument, "box needs lower <= upper");
  }
  for (const auto& c : constraints_) {
    if (auto d = c.dim(); d && *d != dim()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "constraint dimension differs from box dimension");
    }
  }
}

Vector ConstraintSet::clamp(const Vector& x) const {
  return x.cwiseMax(lower_).cwiseMin(upper_);
}

bool ConstraintSet::in_box(const Vector& x, double tol) const {
  return x.size() == lower_.size() &&
         ((x.array() >= lower_.array() - tol) &&
          (x.array() <= upper_.array() + tol))
             .all();
}

Vector ConstraintSet::constraint_values(const Vector& x) const {
  Vector values(static_cast<Eigen::Index>(constraints_.size()));
  for (std::size_t i = 0; i < constraints_.size(); ++i) {
    values[static_cast<Eigen::Index>(i)] = constraints_[i].value(x);
  }
  return values;
}

double ConstraintSet::max_constraint(const Vector& x) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& c : constraints_) worst = std::max(worst, c.value(x));
  return worst;
}

double ConstraintSet::max_violation(const Vector& x) const {
  const double box = std::max(
      {0.0, (lower_ - x).maxCoeff(), (x - upper_).maxCoeff()});
  return std::max(box, std::max(0.0, max_constraint(x)));
}

bool ConstraintSet::contains(const Vector& x, double tol) const {
  return in_box(x, tol) && max_constraint(x) <= tol;
}

double ConstraintSet::slater_margin() const {
  return -max_constraint(slater_point_);
}

void ConstraintSet::check_slater() const {
  const bool interior = ((slater_point_.array() > lower_.array()) ||
                         (lower_.array() == upper_.array()))
                            .all() &&
                        ((slater_point_.array() < upper_.array()) ||
                         (lower_.array() == upper_.array()))
                            .all();
  if (!interior) {
    throw Error(ErrorCode::kSlaterViolation,
                "slater point is not in the relative interior of the box");
  }
  for (std::size_t i = 0; i < constraints_.size(); ++i) {
    const double v = constraints_[i].value(slater_point_);
    if (!(v < 0.0)) {
      std::ostringstream msg;
      msg << "phi_" << i << "(slater) = " << v << " is not negative";
      throw Error(ErrorCode::kSlaterViolation, msg.str());
    }
  }
}

double evaluate(const NonsmoothPart& h, const Vector& x) {
  return std::visit(
      Overloaded{[&](const IndicatorOfSet& s) {
                   return s.set->contains(x)
                              ? 0.0
                              : std::numeric_limits<double>::infinity();
                 },
                 [&](const GenericProx& g) { return g.value(x); }},
      h);
}

const ConstraintSet* CompositeProblem::constraint_set() const {
  if (const auto* ind = std::get_if<IndicatorOfSet>(&nonsmooth)) {
    return ind->set.get();
  }
  return nullptr;
}

CompositeProblem make_indicator_composite(
    SmoothObjective objective,
    std::shared_ptr<const StochasticGradientOracle> oracle,
    std::shared_ptr<const ConstraintSet> constraint_set) {
  if (!oracle || !constraint_set) {
    throw Error(ErrorCode::kInvalidArgument, "oracle and set are required");
  }
  if (objective.dim != oracle->dim() ||
      objective.dim != constraint_set->dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "objective, oracle and constraint set dimensions differ");
  }
  if (!(objective.lipschitz > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "lipschitz constant must be > 0");
  }
  constraint_set->check_slater();

  CompositeProblem problem;
  problem.constants.L = objective.lipschitz;
  problem.constants.ell = objective.weak_convexity;
  problem.constants.C = constraint_set->diameter();
  problem.constants.tau2 = oracle->variance_bound();
  problem.objective = std::move(objective);
  problem.oracle = std::move(oracle);
  problem.nonsmooth = IndicatorOfSet{std::move(constraint_set)};
  return problem;
}

MinibatchSample sample_minibatch_grad(const CompositeProblem& problem,
                                      const Vector& z, int batch, Rng& rng) {
  if (batch < 1) {
    throw Error(ErrorCode::kInvalidArgument, "batch size must be >= 1");
  }
  if (z.size() != problem.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "point has wrong dimension");
  }
  MinibatchSample out;
  out.mean_gradient = problem.oracle->sample(z, batch, rng);
  if (problem.objective.has_exact_gradient()) {
    out.noise = problem.objective.gradient(z) - out.mean_gradient;
  }
  return out;
}

}  // namespace ipag
