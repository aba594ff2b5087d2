#include "ipag/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ipag/error.hpp"
#include "ipag/prox.hpp"

namespace ipag {

namespace {

constexpr int kSurrogateBatch = 10000;
constexpr std::uint64_t kSurrogateSeed = 0x5eedULL;

Vector exact_or_surrogate_gradient(const CompositeProblem& problem,
                                   const Vector& z) {
  if (problem.objective.has_exact_gradient()) {
    return problem.objective.gradient(z);
  }
  Rng rng(kSurrogateSeed);
  return problem.oracle->sample(z, kSurrogateBatch, rng);
}

/// Best feasible grid point of [lo, hi] with `cells` intervals per axis.
std::optional<Vector> grid_pass(const ProxQuery& query,
                                const ConstraintSet& set, const Vector& lo,
                                const Vector& hi, int cells) {
  const auto n = lo.size();
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  std::optional<Vector> best;
  double best_value = std::numeric_limits<double>::infinity();
  Vector u(n);
  while (true) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double frac = static_cast<double>(idx[static_cast<std::size_t>(i)]) / cells;
      u[i] = lo[i] + frac * (hi[i] - lo[i]);
    }
    if (set.contains(u)) {
      const double value = query.distance_term(u);
      if (value < best_value) {
        best_value = value;
        best = u;
      }
    }
    Eigen::Index i = 0;
    for (; i < n; ++i) {
      auto& c = idx[static_cast<std::size_t>(i)];
      if (++c <= cells) break;
      c = 0;
    }
    if (i == n) break;
  }
  return best;
}

}  // namespace

StationarityReport stationarity_residual(const CompositeProblem& problem,
                                         const Vector& z,
                                         std::optional<double> lambda,
                                         int budget) {
  if (z.size() != problem.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "point dimension");
  }
  StationarityReport out;
  out.lambda_used = lambda.value_or(1.0 / (2.0 * problem.constants.L));
  if (!(out.lambda_used > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda must be positive");
  }
  const Vector grad = exact_or_surrogate_gradient(problem, z);
  const ProxQuery query(problem.nonsmooth, z - out.lambda_used * grad,
                        out.lambda_used);
  if (has_exact_projection(query)) {
    out.projection = exact_projection_adapter(query, z, 1).point;
    out.analytic_projection = true;
  } else {
    const ConstraintSet& set = *query.constraint_set();
    const ApproxProxResult r =
        solve_with_restoration(query, set.clamp(query.center()), budget);
    out.projection = r.point;
    out.projection_accuracy = r.rho;
  }
  out.residual_sq = (z - out.projection).squaredNorm();
  out.first_order_ball_radius =
      3.0 * problem.constants.L * std::sqrt(out.residual_sq);
  return out;
}

Vector brute_force_prox(const ProxQuery& query, double grid_step) {
  const ConstraintSet* set = query.constraint_set();
  if (set == nullptr) {
    throw Error(ErrorCode::kUnsupportedSet,
                "grid search needs an indicator of a bounded set");
  }
  if (set->dim() > 3) {
    throw Error(ErrorCode::kDimensionTooLarge,
                "grid search supports dimension <= 3");
  }
  if (!(grid_step > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "grid step must be positive");
  }
  constexpr int kCoarseCells = 64;
  constexpr int kRefine = 4;
  constexpr double kWindowSteps = 4.0;

  Vector lo = set->lower();
  Vector hi = set->upper();
  const double span = (hi - lo).maxCoeff();
  int cells = std::max(1, static_cast<int>(std::ceil(std::min(
                              static_cast<double>(kCoarseCells), span / grid_step))));
  double step = span / cells;
  std::optional<Vector> best = grid_pass(query, *set, lo, hi, cells);
  if (!best) {
    throw Error(ErrorCode::kInvalidArgument, "grid contains no feasible point");
  }
  while (step > grid_step * (1.0 + 1e-12)) {
    const double next = std::max(grid_step, step / kRefine);
    const double half = kWindowSteps * step;
    lo = (best->array() - half).max(set->lower().array());
    hi = (best->array() + half).min(set->upper().array());
    const int window_cells = static_cast<int>(std::ceil(2.0 * half / next));
    // The window is clipped to the box, so its per-axis spacing is at most
    // `next`.
    if (auto refined = grid_pass(query, *set, lo, hi, window_cells)) {
      if (query.distance_term(*refined) <= query.distance_term(*best)) {
        best = std::move(refined);
      }
    }
    step = next;
  }
  return *best;
}

double finite_diff_check(const std::function<Vector(const Vector&)>& gradient,
                         const std::function<double(const Vector&)>& value,
                         std::span<const Vector> points, double step) {
  if (!(step > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "step must be positive");
  }
  double worst = 0.0;
  for (const Vector& x : points) {
    const Vector g = gradient(x);
    Vector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      probe[i] = x[i] + step;
      const double up = value(probe);
      probe[i] = x[i] - step;
      const double down = value(probe);
      probe[i] = x[i];
      const double fd = (up - down) / (2.0 * step);
      worst = std::max(worst, std::abs(fd - g[i]) / std::max(1.0, std::abs(g[i])));
    }
  }
  return worst;
}

double loglog_slope(std::span<const double> ts, std::span<const double> values,
                    double floor) {
  if (ts.size() != values.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "slope inputs differ in length");
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (!(values[i] > floor)) continue;
    const double lx = std::log(ts[i]);
    const double ly = std::log(values[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++count;
  }
  if (count < 2) return -std::numeric_limits<double>::infinity();
  return (count * sxy - sx * sy) / (count * sxx - sx * sx);
}

RateConstants calibrate_rate_constants(const InnerSolver& solver,
                                       std::span<const ProjectionInstance> battery,
                                       std::span<const int> iterations) {
  double worst = 0.0;
  for (const auto& inst : battery) {
    const ProxQuery query(inst.nonsmooth, inst.center, inst.gamma);
    const double initial = (inst.initial - inst.solution).squaredNorm();
    for (int t : iterations) {
      const Vector u = solver.solve(query, inst.initial, t).point;
      const double err = (u - inst.solution).squaredNorm();
      worst = std::max(worst, static_cast<double>(t) * t * err / (initial + 1.0));
    }
  }
  return {worst, worst};
}

bool ProxAudit::all_ok() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) {
    return e.gap_ok && e.certificate_ok;
  });
}

ProxAudit audit_prox_steps(const CompositeProblem& problem,
                           const StepSchedule& schedule,
                           const IpagTrace& trace, double grid_step,
                           double slack) {
  constexpr int kPolishBudget = 100000;
  ProxAudit audit;
  for (const auto& rec : trace.records) {
    for (char step : {'x', 'y'}) {
      const bool is_x = step == 'x';
      const ProxQuery query(problem.nonsmooth, is_x ? rec.x_center : rec.y_center,
                            is_x ? schedule.gamma(rec.k) : schedule.lambda(rec.k));
      ApproxProxResult candidate;
      candidate.point = is_x ? rec.x : rec.y;
      candidate.rho = is_x ? rec.e : rec.rho;

      ProxAuditEntry entry;
      entry.k = rec.k;
      entry.step = step;
      entry.claimed = candidate.rho;
      const Vector grid = brute_force_prox(query, grid_step);
      const ProxAccuracy acc = check_prox_accuracy(candidate, query, grid);
      entry.measured_gap = acc.measured_gap;
      entry.gap_ok = !acc.infeasible_candidate &&
                     acc.measured_gap <= candidate.rho + slack;

      Vector reference = grid;
      const Vector polished =
          solve_with_restoration(query, candidate.point, kPolishBudget).point;
      if (query.objective(polished) < query.objective(reference)) {
        reference = polished;
      }
      try {
        const RhoSubgradientCertificate cert =
            make_certificate(candidate.point, query, candidate.rho, reference);
        entry.certificate_norm_sq = cert.v.squaredNorm();
        entry.certificate_ok =
            entry.certificate_norm_sq <= 2.0 * query.gamma() * cert.rho + 1e-12;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kCertificateUnavailable) throw;
        entry.certificate_ok = false;
      }
      audit.entries.push_back(entry);
    }
  }
  return audit;
}

}  // namespace ipag
