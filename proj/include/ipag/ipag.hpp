#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ipag/inner_solver.hpp"
#include "ipag/model.hpp"

namespace ipag {

/**
 * Per-iteration parameters of the outer loop, indexed k = 1..horizon.
 *
 * alpha: extrapolation weight, gamma / lambda: prox steps of the x and y
 * sequences, Gamma: the product prod_{j>=2} (1 - alpha_j), batch: minibatch
 * size, inner_y / inner_x: iteration budgets of the y and x prox solves.
 */
class StepSchedule {
 public:
  /// Validates alpha in (0, 1], alpha_k gamma_k <= lambda_k, positive steps
  /// and budgets. Gamma follows from alpha by the recursion.
  StepSchedule(double lipschitz, std::vector<double> alpha,
               std::vector<double> gamma, std::vector<double> lambda,
               std::vector<int> batch, std::vector<int> inner_y,
               std::vector<int> inner_x);

  int horizon() const { return static_cast<int>(alpha_.size()); }
  double lipschitz() const { return lipschitz_; }

  double alpha(int k) const { return alpha_[index(k)]; }
  double gamma(int k) const { return gamma_[index(k)]; }
  double lambda(int k) const { return lambda_[index(k)]; }
  double Gamma(int k) const { return Gamma_[index(k)]; }
  /// 1 / Gamma_k, kept separately so integer-valued cases stay exact.
  double inverse_Gamma(int k) const { return inverse_Gamma_[index(k)]; }
  int batch(int k) const { return batch_[index(k)]; }
  int inner_y(int k) const { return inner_y_[index(k)]; }
  int inner_x(int k) const { return inner_x_[index(k)]; }

 private:
  friend StepSchedule accelerated_schedule(double lipschitz, int horizon);
  StepSchedule() = default;
  std::size_t index(int k) const;

  double lipschitz_ = 0.0;
  std::vector<double> alpha_;
  std::vector<double> gamma_;
  std::vector<double> lambda_;
  std::vector<double> Gamma_;
  std::vector<double> inverse_Gamma_;
  std::vector<int> batch_;
  std::vector<int> inner_y_;
  std::vector<int> inner_x_;
};

/// alpha = 2/(k+1), gamma = k/(4L), lambda = 1/(2L), Gamma = 2/(k(k+1)),
/// N = k+1, inner_y = k+1, inner_x = k. Throws InvalidHorizon for T < 2.
StepSchedule accelerated_schedule(double lipschitz, int horizon);

/// Law of the returned iterate index N over {floor(T/2), ..., T}.
struct OutputDistribution {
  int first = 0;
  int last = 0;
  std::vector<double> weights;        // (1 - L lambda_k) / (16 lambda_k Gamma_k)
  std::vector<double> probabilities;  // weights / normalization
  double normalization = 0.0;

  double probability(int k) const;
  int sample(Rng& rng) const;
};

/// Throws DegenerateWeights when some weight is not positive.
OutputDistribution output_distribution(const StepSchedule& schedule,
                                       int horizon);

struct IterationRecord {
  int k = 0;
  Vector x;
  Vector y;
  Vector z;
  Vector x_center;  // x_{k-1} - gamma_k g_k
  Vector y_center;  // z_k - lambda_k g_k
  double residual_sq = 0.0;  // ||y_k - z_k||^2
  double objective = 0.0;    // f(z_k)
  /// max(box violation, max_i [phi_i]_+) over x_k and y_k; 0 for generic h.
  double infeasibility = 0.0;
  /// max_i phi_i over x_k and y_k (-inf without functional constraints).
  double max_constraint = 0.0;
  double e = 0.0;    // certified accuracy of the x step
  double rho = 0.0;  // certified accuracy of the y step
  /// gamma_k (a1 ||x_{k-1} - x_k||^2 + a2) / q_k^2 and its y analogue,
  /// with the declared inner rate constants.
  double e_predicted = 0.0;
  double rho_predicted = 0.0;
  double kappa_x = 0.0;
  double kappa_y = 0.0;
  int inner_x = 0;
  int inner_y = 0;
  int batch = 0;
};

struct IpagTrace {
  std::vector<IterationRecord> records;
  int output_index = 0;
  Vector output;  // z_N
  std::int64_t gradient_samples = 0;
  std::int64_t oracle_calls = 0;
  std::int64_t inner_iterations = 0;
  std::int64_t constraint_evals = 0;
};

/**
 * Inexact proximal accelerated gradient on f + h.
 *
 * Each iteration forms z_k, draws one minibatch at z_k, and uses it for
 * both prox steps: x_k from center x_{k-1} - gamma_k g (budget inner_x,
 * start x_{k-1}) and y_k from center z_k - lambda_k g (budget inner_y,
 * start y_{k-1}). y0 defaults to x0.
 */
IpagTrace run_composite(const CompositeProblem& problem,
                        const StepSchedule& schedule,
                        const InnerSolver& inner_solver, const Vector& x0,
                        const std::optional<Vector>& y0, int horizon,
                        Rng& rng);

/// run_composite for h = indicator of Theta with every prox output restored
/// to exact feasibility through the Slater point.
IpagTrace run_constrained(const CompositeProblem& problem,
                          const StepSchedule& schedule,
                          const InnerSolver& inner_solver, const Vector& x0,
                          const std::optional<Vector>& y0, int horizon,
                          Rng& rng);

/// (T', min_{k <= T'} ||y_k - z_k||^2) for T' = 1..T.
std::vector<std::pair<int, double>> min_residual_curve(const IpagTrace& trace);

struct BaselineOptions {
  int iterations = 0;
  int batch = 0;
  double step = 0.0;
  int inner_budget = 1;
};

/// Step length 1/(2L); T iterations with constant batch (T+3)/2 rounded
/// down and inner budget T+2, so that gradient samples and inner iterations
/// match the accelerated schedule up to one batch.
BaselineOptions matched_baseline(double lipschitz, int horizon);

struct BaselineTrace {
  std::vector<Vector> iterates;  // x_1..x_T
  Vector output;                 // last iterate
  std::int64_t gradient_samples = 0;
  std::int64_t inner_iterations = 0;
  std::int64_t constraint_evals = 0;
  double max_infeasibility = 0.0;
};

/// Projected stochastic gradient x_{t+1} = P(x_t - step g_t), with the
/// projection computed by `inner_solver` and, for constraint sets,
/// restored to exact feasibility.
BaselineTrace run_projected_sgd(const CompositeProblem& problem,
                                const BaselineOptions& options,
                                const InnerSolver& inner_solver,
                                const Vector& x0, Rng& rng);

}  // namespace ipag
