#include "ipag/acceptance.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <sstream>

#include "ipag/error.hpp"
#include "ipag/inner_solver.hpp"
#include "ipag/ipag.hpp"
#include "ipag/problems.hpp"
#include "ipag/verify.hpp"

namespace ipag {

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

CriterionResult finish(int id, std::string name, bool passed,
                       std::string detail, const Stopwatch& clock) {
  return {id, std::move(name), passed, std::move(detail), clock.seconds()};
}

double relative_error(double value, double reference) {
  return std::abs(value - reference) / std::abs(reference);
}

std::int64_t sum_of_k_plus_1(int horizon) {
  const std::int64_t t = horizon;
  return t * (t + 3) / 2;
}

}  // namespace

CriterionResult check_schedule_fidelity() {
  const Stopwatch clock;
  constexpr int kHorizon = 10000;
  bool ok = true;
  double worst_gamma = 0.0;
  double worst_Gamma = 0.0;
  double worst_recursion = 0.0;
  int rational_mismatches = 0;
  for (double L : {0.5, 1.0, 7.3}) {
    const StepSchedule s = accelerated_schedule(L, kHorizon);
    std::vector<double> alphas;
    alphas.reserve(kHorizon);
    for (int k = 1; k <= kHorizon; ++k) alphas.push_back(s.alpha(k));
    const std::vector<double> recursion = gamma_recursion(alphas);
    for (int k = 1; k <= kHorizon; ++k) {
      const double kd = k;
      if (s.alpha(k) != 2.0 / (kd + 1.0) || s.lambda(k) != 1.0 / (2.0 * L) ||
          s.batch(k) != k + 1 || s.inner_y(k) != k + 1 || s.inner_x(k) != k) {
        ++rational_mismatches;
      }
      worst_gamma = std::max(worst_gamma, relative_error(s.gamma(k), kd / (4.0 * L)));
      const double Gamma = 2.0 / (kd * (kd + 1.0));
      worst_Gamma = std::max(worst_Gamma, relative_error(s.Gamma(k), Gamma));
      worst_recursion = std::max(
          worst_recursion, relative_error(s.Gamma(k), recursion[static_cast<std::size_t>(k - 1)]));
    }
  }
  ok = rational_mismatches == 0 && worst_gamma <= 1e-14 && worst_Gamma <= 1e-14 &&
       worst_recursion <= 1e-12;
  ok = ok && clock.seconds() < 1.0;
  return finish(1, "schedule fidelity", ok,
                "rational mismatches " + std::to_string(rational_mismatches) +
                    ", gamma rel err " + fmt(worst_gamma) + ", Gamma rel err " +
                    fmt(worst_Gamma) + ", recursion rel err " + fmt(worst_recursion),
                clock);
}

CriterionResult check_output_distribution() {
  const Stopwatch clock;
  // T = 4: weights proportional to k(k+1) on {2, 3, 4}.
  const OutputDistribution small =
      output_distribution(accelerated_schedule(1.0, 4), 4);
  const bool exact = small.first == 2 && small.last == 4 &&
                     small.probability(2) == 6.0 / 38.0 &&
                     small.probability(3) == 12.0 / 38.0 &&
                     small.probability(4) == 20.0 / 38.0;

  constexpr int kHorizon = 40;
  constexpr int kDraws = 100000;
  const OutputDistribution dist =
      output_distribution(accelerated_schedule(1.0, kHorizon), kHorizon);
  std::vector<int> counts(static_cast<std::size_t>(dist.last - dist.first + 1), 0);
  Rng rng(20240);
  for (int i = 0; i < kDraws; ++i) ++counts[static_cast<std::size_t>(dist.sample(rng) - dist.first)];
  double chi2 = 0.0;
  for (int k = dist.first; k <= dist.last; ++k) {
    const double expected = kDraws * dist.probability(k);
    const double diff = counts[static_cast<std::size_t>(k - dist.first)] - expected;
    chi2 += diff * diff / expected;
  }
  const boost::math::chi_squared law(static_cast<double>(counts.size() - 1));
  const double p_value = boost::math::cdf(boost::math::complement(law, chi2));

  double worst_identity = 0.0;
  for (double L : {0.5, 1.0, 7.3}) {
    for (int T : {4, 10, 40, 400, 4000}) {
      const double t = T;
      const double closed = (L / 32.0) * (7.0 * t * t * t / 24.0 + t * t + 5.0 * t / 6.0);
      const double normalization = output_distribution(accelerated_schedule(L, T), T).normalization;
      worst_identity = std::max(worst_identity, relative_error(normalization, closed));
    }
  }
  const bool ok = exact && p_value >= 1e-3 && worst_identity <= 1e-10 &&
                  clock.seconds() < 10.0;
  return finish(2, "output distribution", ok,
                std::string("T=4 exact ") + (exact ? "yes" : "no") +
                    ", chi-square p " + fmt(p_value) +
                    ", normalization rel err " + fmt(worst_identity),
                clock);
}

CriterionResult check_inner_solver_contract() {
  const Stopwatch clock;
  const std::vector<int> iterations{25, 50, 100, 200, 400, 800};
  const std::vector<double> ts(iterations.begin(), iterations.end());
  const PrimalDualSolver solver;

  // Constants are declared from a separate calibration battery; this one is
  // held out.
  const auto calibration = projection_battery(20, 11);
  const RateConstants calibrated =
      calibrate_rate_constants(solver, calibration, iterations);
  const bool declared_cover =
      calibrated.a1 <= kPrimalDualRateConstants.a1 &&
      calibrated.a2 <= kPrimalDualRateConstants.a2;

  const auto battery = projection_battery(20, 2024);
  double worst_slope = -std::numeric_limits<double>::infinity();
  double worst_ratio = 0.0;
  for (const auto& inst : battery) {
    const ProxQuery query(inst.nonsmooth, inst.center, inst.gamma);
    const double initial = (inst.initial - inst.solution).squaredNorm();
    std::vector<double> errors;
    for (int t : iterations) {
      const Vector u = solver.solve(query, inst.initial, t).point;
      const double err = (u - inst.solution).squaredNorm();
      errors.push_back(err);
      worst_ratio = std::max(worst_ratio, err / kPrimalDualRateConstants.bound(initial, t));
    }
    worst_slope = std::max(worst_slope, loglog_slope(ts, errors));
  }
  const bool ok = worst_slope <= -1.8 && worst_ratio <= 1.0 && declared_cover &&
                  clock.seconds() < 60.0;
  return finish(3, "inner-solver contract", ok,
                "worst slope " + fmt(worst_slope) + ", worst err/bound " +
                    fmt(worst_ratio) + ", calibrated a1=a2=" + fmt(calibrated.a1) +
                    " vs declared " + fmt(kPrimalDualRateConstants.a1),
                clock);
}

CriterionResult check_unconditional_feasibility() {
  const Stopwatch clock;
  constexpr int kHorizon = 100;
  double worst_constraint = -std::numeric_limits<double>::infinity();
  double worst_output = 0.0;
  bool all_in_box = true;
  const PrimalDualSolver solver;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto instance = std::make_shared<const QpInstance>(generate_qp(50, 10, seed, 1.0));
    const CompositeProblem problem = make_qp_problem(instance);
    const ConstraintSet& set = *problem.constraint_set();
    Rng rng(seed);
    const IpagTrace trace =
        run_constrained(problem, accelerated_schedule(instance->lipschitz, kHorizon),
                        solver, set.slater_point(), std::nullopt, kHorizon, rng);
    for (const auto& rec : trace.records) {
      for (const Vector* v : {&rec.x, &rec.y}) {
        worst_constraint = std::max(worst_constraint, set.max_constraint(*v));
        all_in_box = all_in_box && set.in_box(*v);
      }
    }
    worst_output = std::max(worst_output, set.max_violation(trace.output));
  }
  const bool ok = worst_constraint <= 1e-10 && all_in_box && worst_output == 0.0 &&
                  clock.seconds() < 300.0;
  return finish(4, "unconditional feasibility", ok,
                "max phi over x_k, y_k " + fmt(worst_constraint) + ", box " +
                    (all_in_box ? "ok" : "violated") + ", output infeas " +
                    fmt(worst_output),
                clock);
}

CriterionResult check_residual_decay() {
  const Stopwatch clock;
  const std::vector<int> horizons{50, 100, 200, 400, 800};
  const AnalyticProblem fixture = battery_problem("convex_box", 0.0);
  const CompositeProblem& problem = fixture.problem;
  const ExactProjectionSolver solver;
  std::vector<double> ts, residuals;
  double final_stationarity = 0.0;
  for (int T : horizons) {
    Rng rng(static_cast<std::uint64_t>(T));
    const IpagTrace trace = run_constrained(
        problem, accelerated_schedule(problem.constants.L, T), solver,
        problem.constraint_set()->slater_point(), std::nullopt, T, rng);
    ts.push_back(T);
    residuals.push_back(min_residual_curve(trace).back().second);
    if (T == horizons.back()) {
      final_stationarity = stationarity_residual(problem, trace.output).residual_sq;
    }
  }
  const double slope = loglog_slope(ts, residuals);
  const bool ok = slope <= -0.8 && final_stationarity <= 1e-4 && clock.seconds() < 120.0;
  return finish(5, "O(1/T) residual decay", ok,
                "slope " + fmt(slope) + ", min residual at T=800 " +
                    fmt(residuals.back()) + ", stationarity at T=800 " +
                    fmt(final_stationarity),
                clock);
}

CriterionResult check_oracle_accounting() {
  const Stopwatch clock;
  // Exact counts on a constrained problem with the primal-dual solver.
  bool counts_ok = true;
  std::string counts_detail;
  {
    auto instance = std::make_shared<const QpInstance>(generate_qp(10, 3, 5, 1.0));
    const CompositeProblem problem = make_qp_problem(instance);
    const PrimalDualSolver solver;
    for (int T : {10, 37, 60}) {
      Rng rng(static_cast<std::uint64_t>(T));
      const IpagTrace trace =
          run_constrained(problem, accelerated_schedule(instance->lipschitz, T), solver,
                          problem.constraint_set()->slater_point(), std::nullopt, T, rng);
      const std::int64_t t = T;
      counts_ok = counts_ok && trace.gradient_samples == sum_of_k_plus_1(T) &&
                  trace.inner_iterations == t * (t + 2);
      counts_detail += " T=" + std::to_string(T) + ":" +
                       std::to_string(trace.gradient_samples) + "/" +
                       std::to_string(trace.inner_iterations);
    }
  }

  // Samples needed to halve the expected output residual on the noisy convex
  // battery. The schedule is independent of T, so one long run per seed
  // gives every prefix horizon.
  constexpr int kLongest = 1600;
  constexpr int kSeeds = 20;
  const AnalyticProblem fixture = battery_problem("convex_box", 1.0);
  const CompositeProblem& problem = fixture.problem;
  const StepSchedule schedule = accelerated_schedule(problem.constants.L, kLongest);
  const ExactProjectionSolver solver;
  std::vector<double> mean(kLongest + 1, 0.0);
  for (int s = 0; s < kSeeds; ++s) {
    Rng rng(1000 + static_cast<std::uint64_t>(s));
    const IpagTrace trace = run_constrained(problem, schedule, solver,
                                            problem.constraint_set()->slater_point(),
                                            std::nullopt, kLongest, rng);
    for (int k = 1; k <= kLongest; ++k) {
      mean[static_cast<std::size_t>(k)] +=
          trace.records[static_cast<std::size_t>(k - 1)].residual_sq / kSeeds;
    }
  }
  // Expected residual at the randomized output of a horizon-T run.
  std::vector<double> expected(kLongest + 1, std::numeric_limits<double>::infinity());
  for (int T = 2; T <= kLongest; ++T) {
    const OutputDistribution dist = output_distribution(schedule, T);
    double r = 0.0;
    for (int k = dist.first; k <= dist.last; ++k) {
      r += dist.probability(k) * mean[static_cast<std::size_t>(k)];
    }
    expected[static_cast<std::size_t>(T)] = r;
  }
  bool scaling_ok = true;
  std::string ratios;
  for (int T0 : {50, 100, 200, 400}) {
    const double target = expected[static_cast<std::size_t>(T0)] / 2.0;
    int T = T0;
    while (T <= kLongest && expected[static_cast<std::size_t>(T)] > target) ++T;
    if (T > kLongest) {
      scaling_ok = false;
      ratios += " T0=" + std::to_string(T0) + ":unreached";
      continue;
    }
    const double ratio = static_cast<double>(sum_of_k_plus_1(T)) /
                         static_cast<double>(sum_of_k_plus_1(T0));
    scaling_ok = scaling_ok && ratio >= 2.0 && ratio <= 8.0;
    ratios += " " + fmt(ratio);
  }
  const bool ok = counts_ok && scaling_ok && clock.seconds() < 180.0;
  return finish(6, "oracle accounting", ok,
                "samples/inner" + counts_detail + ", sample ratio per halved target" +
                    ratios,
                clock);
}

CriterionResult check_prox_audit() {
  const Stopwatch clock;
  constexpr int kHorizon = 50;
  constexpr double kGrid = 1e-3;
  int entries = 0;
  int bad_gap = 0;
  int bad_certificate = 0;
  const PrimalDualSolver solver;
  for (std::uint64_t seed : {0, 1, 2}) {
    auto instance = std::make_shared<const QpInstance>(generate_small_qp(2, 2, seed, 1.0));
    const CompositeProblem problem = make_qp_problem(instance);
    const StepSchedule schedule = accelerated_schedule(instance->lipschitz, kHorizon);
    Rng rng(seed);
    const IpagTrace trace = run_constrained(problem, schedule, solver,
                                            problem.constraint_set()->slater_point(),
                                            std::nullopt, kHorizon, rng);
    const ProxAudit audit = audit_prox_steps(problem, schedule, trace, kGrid, kGrid);
    for (const auto& e : audit.entries) {
      ++entries;
      bad_gap += e.gap_ok && std::isfinite(e.claimed) ? 0 : 1;
      bad_certificate += e.certificate_ok ? 0 : 1;
    }
  }
  const bool ok = bad_gap == 0 && bad_certificate == 0 && entries > 0 &&
                  clock.seconds() < 120.0;
  return finish(7, "prox accuracy audit", ok,
                std::to_string(entries) + " prox steps, gap failures " +
                    std::to_string(bad_gap) + ", certificate failures " +
                    std::to_string(bad_certificate),
                clock);
}

CriterionResult check_oracle_moments() {
  const Stopwatch clock;
  constexpr int kDraws = 10000;
  auto instance = std::make_shared<const QpInstance>(generate_qp(10, 2, 8, 1.0));
  const QpGradientOracle oracle(instance);
  Rng point_rng(81);
  const Vector x = Vector::NullaryExpr(instance->n, [&] {
    return std::uniform_real_distribution<double>(-5.0, 5.0)(point_rng);
  });
  const Vector exact = qp_full_gradient(*instance, x);

  Rng rng(82);
  Vector sum = Vector::Zero(instance->n);
  Vector sum_sq = Vector::Zero(instance->n);
  for (int i = 0; i < kDraws; ++i) {
    const Vector noise = oracle.sample(x, 1, rng) - exact;
    sum += noise;
    sum_sq += noise.cwiseProduct(noise);
  }
  const Vector mean = sum / kDraws;
  const Vector var = (sum_sq - kDraws * mean.cwiseProduct(mean)) / (kDraws - 1);
  double worst_se = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double se = std::sqrt(var[i] / kDraws);
    if (se > 0.0) worst_se = std::max(worst_se, std::abs(mean[i]) / se);
  }

  double worst_moment = 0.0;
  for (int batch : {1, 10, 100}) {
    double acc = 0.0;
    for (int i = 0; i < kDraws; ++i) {
      acc += (oracle.sample(x, batch, rng) - exact).squaredNorm();
    }
    const double closed = oracle.variance_bound() / batch;
    worst_moment = std::max(worst_moment, relative_error(acc / kDraws, closed));
  }
  const bool ok = worst_se <= 3.0 && worst_moment <= 0.05 && clock.seconds() < 30.0;
  return finish(8, "stochastic oracle moments", ok,
                "max |bias|/se " + fmt(worst_se) + ", worst second-moment rel err " +
                    fmt(worst_moment),
                clock);
}

CriterionResult check_baseline_comparison() {
  const Stopwatch clock;
  constexpr int kHorizon = 100;
  constexpr int kRuns = 5;
  int wins = 0;
  bool budgets_match = true;
  bool feasible = true;
  std::string values;
  const PrimalDualSolver solver;
  for (int r = 0; r < kRuns; ++r) {
    const auto seed = static_cast<std::uint64_t>(100 + r);
    auto instance = std::make_shared<const QpInstance>(generate_qp(50, 10, seed, 1.0));
    const CompositeProblem problem = make_qp_problem(instance);
    const ConstraintSet& set = *problem.constraint_set();
    Rng ipag_rng(seed);
    const IpagTrace trace =
        run_constrained(problem, accelerated_schedule(instance->lipschitz, kHorizon),
                        solver, set.slater_point(), std::nullopt, kHorizon, ipag_rng);
    Rng baseline_rng(seed + 1000);
    const BaselineOptions options = matched_baseline(instance->lipschitz, kHorizon);
    const BaselineTrace baseline =
        run_projected_sgd(problem, options, solver, set.slater_point(), baseline_rng);

    budgets_match = budgets_match &&
                    std::abs(trace.gradient_samples - baseline.gradient_samples) <=
                        options.batch;
    feasible = feasible && set.max_violation(trace.output) == 0.0 &&
               set.max_violation(baseline.output) == 0.0;
    const double f_ipag = instance->value(trace.output);
    const double f_base = instance->value(baseline.output);
    wins += f_ipag <= f_base ? 1 : 0;
    values += " " + fmt(f_ipag) + "/" + fmt(f_base);
  }
  const bool ok = wins >= 4 && budgets_match && feasible && clock.seconds() < 600.0;
  return finish(9, "baseline comparison", ok,
                "IPAG wins " + std::to_string(wins) + "/" + std::to_string(kRuns) +
                    " (f ipag/baseline:" + values + "), budgets " +
                    (budgets_match ? "matched" : "differ"),
                clock);
}

std::vector<AcceptanceCheck> acceptance_checks() {
  return {
      {1, "schedule fidelity", check_schedule_fidelity},
      {2, "output distribution", check_output_distribution},
      {3, "inner-solver contract", check_inner_solver_contract},
      {4, "unconditional feasibility", check_unconditional_feasibility},
      {5, "O(1/T) residual decay", check_residual_decay},
      {6, "oracle accounting", check_oracle_accounting},
      {7, "prox accuracy audit", check_prox_audit},
      {8, "stochastic oracle moments", check_oracle_moments},
      {9, "baseline comparison", check_baseline_comparison},
  };
}

std::string format_result(const CriterionResult& result) {
  std::ostringstream out;
  out << (result.passed ? "PASS" : "FAIL") << " [" << result.id << "] "
      << result.name << " (" << fmt(result.seconds) << " s): " << result.detail;
  return out.str();
}

}  // namespace ipag
