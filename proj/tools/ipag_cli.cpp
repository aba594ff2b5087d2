// ipag: experiment runner, acceptance verifier and oracle-count benchmark.
//
// Exit status: 0 success, 1 bad input (arguments, config, output paths),
// 2 solver failure or failed verification.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "ipag/acceptance.hpp"
#include "ipag/error.hpp"
#include "ipag/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitSolver = 2;

int exit_code_for(ipag::ErrorCode code) {
  switch (code) {
    case ipag::ErrorCode::kParseError:
    case ipag::ErrorCode::kValidationError:
    case ipag::ErrorCode::kIoError:
      return kExitInput;
    default:
      return kExitSolver;
  }
}

ipag::ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ipag::Error(ipag::ErrorCode::kIoError, "cannot read '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return ipag::parse_config(text.str());
}

void print_summary(const ipag::RunReport& report) {
  const auto f = report.f_final();
  const auto infeas = report.infeasibility();
  const auto cpu = report.cpu_s();
  std::fprintf(stderr,
               "%zu replications: f_final %.6g +- %.3g, infeas %.3g +- %.3g, "
               "cpu %.3g +- %.3g s\n",
               report.rows.size(), f.mean, f.stddev, infeas.mean, infeas.stddev,
               cpu.mean, cpu.stddev);
}

int cmd_run(const std::string& config_path, const std::optional<std::string>& out,
            const std::optional<std::uint64_t>& seed, int parallel) {
  ipag::ExperimentConfig config = load_config(config_path);
  if (out) config.csv_path = *out;
  if (seed) config.seed = *seed;
  ipag::validate_config(config);

  const ipag::RunReport report = ipag::run_experiment(config, parallel);
  if (config.csv_path.empty()) {
    ipag::write_csv(report, std::cout);
  } else {
    ipag::emit_csv(report, config.csv_path);
  }
  if (!config.residual_curve_path.empty()) {
    for (const auto& row : report.rows) {
      const std::string path =
          ipag::residual_curve_path(config.residual_curve_path, row.replication);
      std::ofstream file(path, std::ios::binary);
      if (!file) throw ipag::Error(ipag::ErrorCode::kIoError, "cannot open '" + path + "'");
      ipag::write_residual_curve(row, file);
    }
  }
  print_summary(report);
  return kExitOk;
}

int cmd_verify(const std::vector<int>& criteria) {
  const std::set<int> only(criteria.begin(), criteria.end());
  int failures = 0;
  for (const auto& check : ipag::acceptance_checks()) {
    if (!only.empty() && !only.count(check.id)) continue;
    ipag::CriterionResult result;
    try {
      result = check.run();
    } catch (const std::exception& e) {
      result = {check.id, check.name, false, std::string("threw: ") + e.what(), 0.0};
    }
    std::printf("%s\n", ipag::format_result(result).c_str());
    std::fflush(stdout);
    failures += result.passed ? 0 : 1;
  }
  return failures == 0 ? kExitOk : kExitSolver;
}

int cmd_bench(const std::optional<std::string>& config_path,
              const std::optional<std::uint64_t>& seed) {
  ipag::ExperimentConfig config;
  if (config_path) {
    config = load_config(*config_path);
  } else {
    config.problem = ipag::QpSpec{50, 10, 1.0};
    config.horizon = 100;
  }
  if (seed) config.seed = *seed;
  config.baseline = true;
  ipag::validate_config(config);

  const ipag::ReplicationResult row = ipag::run_replication(config, 0);
  const std::int64_t T = row.horizon;
  std::printf("problem            n=%d m=%d std=%g T=%d\n", row.n, row.m,
              row.noise_std, row.horizon);
  std::printf("gradient samples   %lld (schedule: %lld)\n",
              static_cast<long long>(row.grad_samples),
              static_cast<long long>(T * (T + 3) / 2));
  std::printf("inner iterations   %lld (schedule: %lld)\n",
              static_cast<long long>(row.inner_iterations),
              static_cast<long long>(T * (T + 2)));
  std::printf("constraint evals   %lld\n", static_cast<long long>(row.constraint_evals));
  std::printf("ipag wall time     %.3f s\n", row.cpu_s);
  std::printf("baseline samples   %lld\n", static_cast<long long>(row.baseline_grad_samples));
  std::printf("baseline wall time %.3f s\n", row.baseline_cpu_s);
  std::printf("f_final            ipag %.6g, baseline %.6g\n", row.f_final,
              row.baseline_f_final);
  std::printf("infeasibility      ipag %.3g, baseline %.3g\n", row.infeasibility,
              row.baseline_infeasibility);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inexact-proximal accelerated gradient experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  int parallel = 1;
  auto* run = app.add_subcommand("run", "Run the replications of a JSON config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out, "Results CSV (overrides the config; default stdout)");
  run->add_option("--seed", seed, "Base seed override");
  run->add_option("--parallel", parallel, "Replications run concurrently")
      ->check(CLI::PositiveNumber);

  std::vector<int> criteria;
  auto* verify = app.add_subcommand("verify", "Run the acceptance criteria");
  verify->add_option("--criterion", criteria, "Only these criteria (1-9)")
      ->check(CLI::Range(1, 9));

  std::optional<std::string> bench_config;
  auto* bench = app.add_subcommand("bench", "Oracle counts and timing for one replication");
  bench->add_option("--config", bench_config, "Experiment config (JSON)");
  bench->add_option("--seed", seed, "Base seed override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*run) return cmd_run(config_path, out, seed, parallel);
    if (*verify) return cmd_verify(criteria);
    if (*bench) return cmd_bench(bench_config, seed);
  } catch (const ipag::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSolver;
  }
  return kExitOk;
}
