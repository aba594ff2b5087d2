#include "ipag/ipag.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "ipag/error.hpp"
#include "ipag/prox.hpp"

namespace ipag {

namespace {

void require_finite(const Vector& v, std::string_view what, int k) {
  if (!v.allFinite()) {
    throw Error(ErrorCode::kNonFiniteIterate,
                std::string(what) + " is not finite at iteration " +
                    std::to_string(k));
  }
}

template <class Fn>
ApproxProxResult with_context(int k, std::string_view step, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), "iteration " + std::to_string(k) + ", " +
                              std::string(step) + ": " + e.what());
  }
}

double max_constraint_of(const NonsmoothPart& h, const Vector& a,
                         const Vector& b) {
  const auto* ind = std::get_if<IndicatorOfSet>(&h);
  if (ind == nullptr) return -std::numeric_limits<double>::infinity();
  return std::max(ind->set->max_constraint(a), ind->set->max_constraint(b));
}

double infeasibility_of(const NonsmoothPart& h, const Vector& a,
                        const Vector& b) {
  const auto* ind = std::get_if<IndicatorOfSet>(&h);
  if (ind == nullptr) return 0.0;
  return std::max(ind->set->max_violation(a), ind->set->max_violation(b));
}

IpagTrace run_outer(const CompositeProblem& problem,
                    const StepSchedule& schedule, const InnerSolver& inner,
                    const Vector& x0, const std::optional<Vector>& y0,
                    int horizon, Rng& rng) {
  if (horizon < 1 || horizon > schedule.horizon()) {
    throw Error(ErrorCode::kInvalidHorizon,
                "horizon must lie in [1, schedule horizon]");
  }
  const Vector y_start = y0.value_or(x0);
  if (x0.size() != problem.dim() || y_start.size() != problem.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "initial point dimension");
  }
  if (!std::isfinite(evaluate(problem.nonsmooth, x0)) ||
      !std::isfinite(evaluate(problem.nonsmooth, y_start))) {
    throw Error(ErrorCode::kInvalidArgument,
                "initial points must lie in the domain of h");
  }
  const RateConstants rate = kPrimalDualRateConstants;

  IpagTrace trace;
  trace.records.reserve(static_cast<std::size_t>(horizon));
  Vector x = x0;
  Vector y = y_start;
  for (int k = 1; k <= horizon; ++k) {
    const double alpha = schedule.alpha(k);
    const double gamma = schedule.gamma(k);
    const double lambda = schedule.lambda(k);
    const int batch = schedule.batch(k);

    IterationRecord rec;
    rec.k = k;
    rec.z = (1.0 - alpha) * y + alpha * x;
    const Vector g = problem.oracle->sample(rec.z, batch, rng);
    ++trace.oracle_calls;
    trace.gradient_samples += batch;
    require_finite(g, "sampled gradient", k);

    rec.x_center = x - gamma * g;
    rec.y_center = rec.z - lambda * g;
    const ProxQuery x_query(problem.nonsmooth, rec.x_center, gamma);
    const ProxQuery y_query(problem.nonsmooth, rec.y_center, lambda);
    const ApproxProxResult xr = with_context(k, "x step", [&] {
      return inner.solve(x_query, x, schedule.inner_x(k));
    });
    const ApproxProxResult yr = with_context(k, "y step", [&] {
      return inner.solve(y_query, y, schedule.inner_y(k));
    });
    require_finite(xr.point, "x", k);
    require_finite(yr.point, "y", k);

    const double x_move = (x - xr.point).squaredNorm();
    const double y_move = (y - yr.point).squaredNorm();
    const double qk = schedule.inner_x(k);
    const double pk = schedule.inner_y(k);
    rec.e_predicted = gamma * (rate.a1 * x_move + rate.a2) / (qk * qk);
    rec.rho_predicted = lambda * (rate.a1 * y_move + rate.a2) / (pk * pk);

    x = xr.point;
    y = yr.point;
    rec.x = x;
    rec.y = y;
    rec.residual_sq = (y - rec.z).squaredNorm();
    rec.objective = problem.objective.value ? problem.objective.value(rec.z)
                                            : std::numeric_limits<double>::quiet_NaN();
    rec.max_constraint = max_constraint_of(problem.nonsmooth, x, y);
    rec.infeasibility = infeasibility_of(problem.nonsmooth, x, y);
    rec.e = xr.rho;
    rec.rho = yr.rho;
    rec.kappa_x = xr.kappa;
    rec.kappa_y = yr.kappa;
    rec.inner_x = xr.inner_iters;
    rec.inner_y = yr.inner_iters;
    rec.batch = batch;
    trace.inner_iterations += xr.inner_iters + yr.inner_iters;
    trace.constraint_evals += xr.constraint_evals + yr.constraint_evals;
    trace.records.push_back(std::move(rec));
  }

  const OutputDistribution law = output_distribution(schedule, horizon);
  trace.output_index = law.sample(rng);
  trace.output = trace.records[static_cast<std::size_t>(trace.output_index - 1)].z;
  return trace;
}

}  // namespace

StepSchedule::StepSchedule(double lipschitz, std::vector<double> alpha,
                           std::vector<double> gamma,
                           std::vector<double> lambda, std::vector<int> batch,
                           std::vector<int> inner_y, std::vector<int> inner_x)
    : lipschitz_(lipschitz),
      alpha_(std::move(alpha)),
      gamma_(std::move(gamma)),
      lambda_(std::move(lambda)),
      batch_(std::move(batch)),
      inner_y_(std::move(inner_y)),
      inner_x_(std::move(inner_x)) {
  if (!(lipschitz_ > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "L must be positive");
  }
  const std::size_t T = alpha_.size();
  if (T == 0 || gamma_.size() != T || lambda_.size() != T ||
      batch_.size() != T || inner_y_.size() != T || inner_x_.size() != T) {
    throw Error(ErrorCode::kInvalidHorizon,
                "schedule sequences must share a positive length");
  }
  Gamma_ = gamma_recursion(alpha_);
  inverse_Gamma_.resize(T);
  for (std::size_t i = 0; i < T; ++i) {
    const int k = static_cast<int>(i) + 1;
    if (!(gamma_[i] > 0.0) || !(lambda_[i] > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "step sizes must be positive at k=" + std::to_string(k));
    }
    if (batch_[i] < 1 || inner_y_[i] < 1 || inner_x_[i] < 1) {
      throw Error(ErrorCode::kBudgetZero,
                  "batch and inner budgets must be >= 1 at k=" + std::to_string(k));
    }
    if (alpha_[i] * gamma_[i] > lambda_[i] * (1.0 + 1e-15)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "alpha_k gamma_k <= lambda_k fails at k=" + std::to_string(k));
    }
    inverse_Gamma_[i] = 1.0 / Gamma_[i];
  }
}

std::size_t StepSchedule::index(int k) const {
  if (k < 1 || k > horizon()) {
    throw Error(ErrorCode::kInvalidHorizon,
                "iteration index " + std::to_string(k) + " outside schedule");
  }
  return static_cast<std::size_t>(k - 1);
}

StepSchedule accelerated_schedule(double lipschitz, int horizon) {
  if (horizon < 2) {
    throw Error(ErrorCode::kInvalidHorizon, "horizon must be >= 2");
  }
  if (!(lipschitz > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "L must be positive");
  }
  StepSchedule s;
  s.lipschitz_ = lipschitz;
  const auto T = static_cast<std::size_t>(horizon);
  s.alpha_.resize(T);
  s.gamma_.resize(T);
  s.lambda_.resize(T);
  s.Gamma_.resize(T);
  s.inverse_Gamma_.resize(T);
  s.batch_.resize(T);
  s.inner_y_.resize(T);
  s.inner_x_.resize(T);
  for (std::size_t i = 0; i < T; ++i) {
    const double k = static_cast<double>(i + 1);
    s.alpha_[i] = 2.0 / (k + 1.0);
    s.gamma_[i] = k / (4.0 * lipschitz);
    s.lambda_[i] = 1.0 / (2.0 * lipschitz);
    s.Gamma_[i] = 2.0 / (k * (k + 1.0));
    s.inverse_Gamma_[i] = k * (k + 1.0) / 2.0;
    s.batch_[i] = static_cast<int>(i) + 2;
    s.inner_y_[i] = static_cast<int>(i) + 2;
    s.inner_x_[i] = static_cast<int>(i) + 1;
  }
  return s;
}

double OutputDistribution::probability(int k) const {
  if (k < first || k > last) return 0.0;
  return probabilities[static_cast<std::size_t>(k - first)];
}

int OutputDistribution::sample(Rng& rng) const {
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  return first + pick(rng);
}

OutputDistribution output_distribution(const StepSchedule& schedule,
                                       int horizon) {
  if (horizon < 1 || horizon > schedule.horizon()) {
    throw Error(ErrorCode::kInvalidHorizon,
                "horizon must lie in [1, schedule horizon]");
  }
  OutputDistribution out;
  out.first = std::max(1, horizon / 2);
  out.last = horizon;
  const double L = schedule.lipschitz();
  for (int k = out.first; k <= out.last; ++k) {
    const double lambda = schedule.lambda(k);
    const double w =
        (1.0 - L * lambda) * schedule.inverse_Gamma(k) / (16.0 * lambda);
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::kDegenerateWeights,
                  "output weight not positive at k=" + std::to_string(k));
    }
    out.weights.push_back(w);
    out.normalization += w;
  }
  for (double w : out.weights) out.probabilities.push_back(w / out.normalization);
  return out;
}

IpagTrace run_composite(const CompositeProblem& problem,
                        const StepSchedule& schedule,
                        const InnerSolver& inner_solver, const Vector& x0,
                        const std::optional<Vector>& y0, int horizon,
                        Rng& rng) {
  return run_outer(problem, schedule, inner_solver, x0, y0, horizon, rng);
}

IpagTrace run_constrained(const CompositeProblem& problem,
                          const StepSchedule& schedule,
                          const InnerSolver& inner_solver, const Vector& x0,
                          const std::optional<Vector>& y0, int horizon,
                          Rng& rng) {
  const ConstraintSet* set = problem.constraint_set();
  if (set == nullptr) {
    throw Error(ErrorCode::kUnsupportedSet,
                "constrained run needs h = indicator of a constraint set");
  }
  set->check_slater();
  // Non-owning view; the restoring wrapper lives only for this call.
  const std::shared_ptr<const InnerSolver> base(&inner_solver,
                                                [](const InnerSolver*) {});
  const RestoringSolver restoring(base);
  return run_outer(problem, schedule, restoring, x0, y0, horizon, rng);
}

std::vector<std::pair<int, double>> min_residual_curve(const IpagTrace& trace) {
  std::vector<std::pair<int, double>> out;
  out.reserve(trace.records.size());
  double best = std::numeric_limits<double>::infinity();
  for (const auto& rec : trace.records) {
    best = std::min(best, rec.residual_sq);
    out.emplace_back(rec.k, best);
  }
  return out;
}

BaselineOptions matched_baseline(double lipschitz, int horizon) {
  if (horizon < 2) {
    throw Error(ErrorCode::kInvalidHorizon, "horizon must be >= 2");
  }
  BaselineOptions out;
  out.iterations = horizon;
  out.batch = (horizon + 3) / 2;
  out.step = 1.0 / (2.0 * lipschitz);
  out.inner_budget = horizon + 2;
  return out;
}

BaselineTrace run_projected_sgd(const CompositeProblem& problem,
                                const BaselineOptions& options,
                                const InnerSolver& inner_solver,
                                const Vector& x0, Rng& rng) {
  if (options.iterations < 1 || options.batch < 1 || options.inner_budget < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "baseline needs positive iterations, batch and budget");
  }
  if (!(options.step > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "baseline step must be positive");
  }
  if (x0.size() != problem.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "initial point dimension");
  }
  const ConstraintSet* set = problem.constraint_set();
  BaselineTrace trace;
  Vector x = x0;
  for (int t = 1; t <= options.iterations; ++t) {
    const Vector g = problem.oracle->sample(x, options.batch, rng);
    trace.gradient_samples += options.batch;
    require_finite(g, "sampled gradient", t);
    const ProxQuery query(problem.nonsmooth, x - options.step * g, options.step);
    const ApproxProxResult r = with_context(t, "projection", [&] {
      return set != nullptr
                 ? solve_with_restoration(query, x, options.inner_budget,
                                          inner_solver)
                 : inner_solver.solve(query, x, options.inner_budget);
    });
    require_finite(r.point, "x", t);
    x = r.point;
    trace.inner_iterations += r.inner_iters;
    trace.constraint_evals += r.constraint_evals;
    if (set != nullptr) {
      trace.max_infeasibility =
          std::max(trace.max_infeasibility, set->max_violation(x));
    }
    trace.iterates.push_back(x);
  }
  trace.output = x;
  return trace;
}

}  // namespace ipag
