#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "ipag/problems.hpp"

namespace ipag {

struct QpSpec {
  int n = 0;
  int m = 0;
  double noise_std = 1.0;
  DiagonalSampling diagonal = DiagonalSampling::kDiscreteUniform;
};

struct BatterySpec {
  std::string name;
  double noise_std = 0.0;
};

enum class InnerChoice { kPrimalDual, kExact };

struct ExperimentConfig {
  std::variant<QpSpec, BatterySpec> problem;
  int horizon = 200;
  int replications = 5;
  std::uint64_t seed = 0;
  InnerChoice inner = InnerChoice::kPrimalDual;
  bool baseline = false;
  bool residual_report = false;
  std::string csv_path;             // empty: no file
  std::string residual_curve_path;  // empty: no curve files
};

/**
 * Parses a JSON object such as
 *
 *   {"problem": {"qp": {"n": 100, "m": 25, "noise_std": 1}},
 *    "T": 200, "R": 5, "seed": 1, "inner": "apd", "baseline": true,
 *    "out": "results.csv", "residual_curve": "curve.csv",
 *    "residual_report": false}
 *
 * or with {"battery": {"name": "convex_box", "noise_std": 0}} as the
 * problem. Throws ParseError (malformed text or wrong types, with the key
 * path) or ValidationError (out-of-range values, unknown keys).
 */
ExperimentConfig parse_config(std::string_view text);

/// Range checks shared by parse_config and command-line overrides.
void validate_config(const ExperimentConfig& config);

struct ReplicationResult {
  int replication = 0;
  int n = 0;
  int m = 0;
  double noise_std = 0.0;
  int horizon = 0;
  double f_final = 0.0;  // objective at z_N
  double f_best = 0.0;   // best exact objective over the stored iterates
  double infeasibility = 0.0;
  double cpu_s = 0.0;
  std::int64_t grad_samples = 0;
  std::int64_t constraint_evals = 0;
  std::int64_t inner_iterations = 0;
  double min_residual_at_T = 0.0;
  double stationarity = 0.0;  // projected-gradient residual at z_N
  int output_index = 0;
  std::vector<std::pair<int, double>> residual_curve;

  bool has_baseline = false;
  double baseline_f_final = 0.0;
  double baseline_infeasibility = 0.0;
  double baseline_cpu_s = 0.0;
  std::int64_t baseline_grad_samples = 0;
};

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;
};

struct RunReport {
  ExperimentConfig config;
  std::vector<ReplicationResult> rows;

  Summary f_final() const;
  Summary infeasibility() const;
  Summary cpu_s() const;
};

/// R replications with seeds base + r, at most `parallel` at a time.
RunReport run_experiment(const ExperimentConfig& config, int parallel = 1);

/// One replication; exposed for tests and the bench command.
ReplicationResult run_replication(const ExperimentConfig& config, int replication);

void write_csv(const RunReport& report, std::ostream& out);
/// Throws IoError when the file cannot be written.
void emit_csv(const RunReport& report, const std::string& path);

/// Two columns: T, min_{k <= T} ||y_k - z_k||^2.
void write_residual_curve(const ReplicationResult& row, std::ostream& out);

/// "<stem>_r<replication><ext>" for the curve of one replication.
std::string residual_curve_path(const std::string& base, int replication);

}  // namespace ipag
