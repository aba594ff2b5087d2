#include "ipag/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "ipag/error.hpp"
#include "ipag/ipag.hpp"
#include "ipag/verify.hpp"
#include "json.hpp"

namespace ipag {

namespace {

using nlohmann::json;

constexpr int kObjectiveSamples = 10000;

[[noreturn]] void parse_fail(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::kParseError, path + ": " + what);
}

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::kValidationError, field + ": " + what);
}

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<std::string_view> known) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      invalid(path + key, "unknown key");
    }
  }
}

int get_int(const json& obj, const std::string& key, const std::string& path,
            int fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) parse_fail(path + key, "expected an integer");
  const auto value = v.get<std::int64_t>();
  if (value < std::numeric_limits<int>::min() ||
      value > std::numeric_limits<int>::max()) {
    invalid(path + key, "out of range");
  }
  return static_cast<int>(value);
}

double get_double(const json& obj, const std::string& key,
                  const std::string& path, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) parse_fail(path + key, "expected a number");
  return v.get<double>();
}

bool get_bool(const json& obj, const std::string& key, const std::string& path,
              bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) parse_fail(path + key, "expected true or false");
  return v.get<bool>();
}

std::string get_string(const json& obj, const std::string& key,
                       const std::string& path, std::string fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) parse_fail(path + key, "expected a string");
  return v.get<std::string>();
}

const json& get_object(const json& obj, const std::string& key,
                       const std::string& path) {
  const json& v = obj.at(key);
  if (!v.is_object()) parse_fail(path + key, "expected an object");
  return v;
}

struct BuiltProblem {
  CompositeProblem problem;
  std::shared_ptr<const QpInstance> qp;  // null for battery problems
  int constraints = 0;
};

BuiltProblem build_problem(const ExperimentConfig& config, std::uint64_t seed) {
  BuiltProblem out;
  if (const auto* qp = std::get_if<QpSpec>(&config.problem)) {
    out.qp = std::make_shared<const QpInstance>(
        generate_qp(qp->n, qp->m, seed, qp->noise_std, qp->diagonal));
    out.problem = make_qp_problem(out.qp);
    out.constraints = qp->m;
  } else {
    const auto& battery = std::get<BatterySpec>(config.problem);
    out.problem = battery_problem(battery.name, battery.noise_std).problem;
    out.constraints =
        static_cast<int>(out.problem.constraint_set()->constraints().size());
  }
  return out;
}

std::shared_ptr<const InnerSolver> make_inner(InnerChoice choice) {
  if (choice == InnerChoice::kExact) {
    return std::make_shared<const ExactProjectionSolver>();
  }
  return std::make_shared<const PrimalDualSolver>();
}

/// Three independent streams per replication: run, baseline, evaluation.
Rng stream(std::uint64_t seed, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return Rng(seq);
}

double objective_estimate(const BuiltProblem& built, const Vector& x,
                          Rng& rng) {
  if (built.qp) return built.qp->sampled_value(x, kObjectiveSamples, rng);
  return built.problem.objective.value(x);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

void write_number(std::ostream& out, double value) {
  if (std::isnan(value)) {
    out << "nan";
    return;
  }
  if (std::isinf(value)) {
    out << (value > 0 ? "inf" : "-inf");
    return;
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  out.write(buf, res.ptr - buf);
}

Summary summarize(const std::vector<ReplicationResult>& rows,
                  double ReplicationResult::*field) {
  Summary s;
  if (rows.empty()) return s;
  for (const auto& r : rows) s.mean += r.*field;
  s.mean /= static_cast<double>(rows.size());
  if (rows.size() > 1) {
    double sq = 0.0;
    for (const auto& r : rows) sq += (r.*field - s.mean) * (r.*field - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(rows.size() - 1));
  }
  return s;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, std::string("config: ") + e.what());
  }
  if (!doc.is_object()) parse_fail("config", "expected a JSON object");
  reject_unknown(doc, "", {"problem", "T", "R", "seed", "inner", "baseline",
                           "out", "residual_curve", "residual_report"});

  ExperimentConfig cfg;
  if (!doc.contains("problem")) invalid("problem", "missing");
  const json& problem = get_object(doc, "problem", "");
  if (problem.size() != 1) {
    invalid("problem", "expected exactly one of \"qp\" or \"battery\"");
  }
  if (problem.contains("qp")) {
    const json& qp = get_object(problem, "qp", "problem.");
    reject_unknown(qp, "problem.qp.", {"n", "m", "noise_std", "diagonal"});
    QpSpec spec;
    if (!qp.contains("n")) invalid("problem.qp.n", "missing");
    if (!qp.contains("m")) invalid("problem.qp.m", "missing");
    spec.n = get_int(qp, "n", "problem.qp.", 0);
    spec.m = get_int(qp, "m", "problem.qp.", 0);
    spec.noise_std = get_double(qp, "noise_std", "problem.qp.", 1.0);
    const std::string diagonal =
        get_string(qp, "diagonal", "problem.qp.", "uniform");
    if (diagonal == "uniform") {
      spec.diagonal = DiagonalSampling::kDiscreteUniform;
    } else if (diagonal == "two_point") {
      spec.diagonal = DiagonalSampling::kTwoPoint;
    } else {
      invalid("problem.qp.diagonal", "expected \"uniform\" or \"two_point\"");
    }
    cfg.problem = spec;
  } else if (problem.contains("battery")) {
    const json& battery = get_object(problem, "battery", "problem.");
    reject_unknown(battery, "problem.battery.", {"name", "noise_std"});
    BatterySpec spec;
    spec.name = get_string(battery, "name", "problem.battery.", "");
    spec.noise_std = get_double(battery, "noise_std", "problem.battery.", 0.0);
    cfg.problem = spec;
  } else {
    invalid("problem", "expected \"qp\" or \"battery\"");
  }

  cfg.horizon = get_int(doc, "T", "", 200);
  cfg.replications = get_int(doc, "R", "", 5);
  if (doc.contains("seed")) {
    const json& seed = doc.at("seed");
    if (!seed.is_number_integer()) parse_fail("seed", "expected an integer");
    if (seed.is_number_unsigned()) {
      cfg.seed = seed.get<std::uint64_t>();
    } else {
      const auto s = seed.get<std::int64_t>();
      if (s < 0) invalid("seed", "must be nonnegative");
      cfg.seed = static_cast<std::uint64_t>(s);
    }
  }
  const std::string inner = get_string(doc, "inner", "", "apd");
  if (inner == "apd") {
    cfg.inner = InnerChoice::kPrimalDual;
  } else if (inner == "exact") {
    cfg.inner = InnerChoice::kExact;
  } else {
    invalid("inner", "expected \"apd\" or \"exact\"");
  }
  cfg.baseline = get_bool(doc, "baseline", "", false);
  cfg.residual_report = get_bool(doc, "residual_report", "", false);
  cfg.csv_path = get_string(doc, "out", "", "");
  cfg.residual_curve_path = get_string(doc, "residual_curve", "", "");
  validate_config(cfg);
  return cfg;
}

void validate_config(const ExperimentConfig& config) {
  if (config.horizon < 2) invalid("T", "must be >= 2");
  if (config.replications < 1) invalid("R", "must be >= 1");
  if (const auto* qp = std::get_if<QpSpec>(&config.problem)) {
    if (qp->n % 2 != 0) invalid("problem.qp.n", "n must be even, p=n/2");
    if (qp->n < 4) invalid("problem.qp.n", "must be >= 4");
    if (qp->m < 1) invalid("problem.qp.m", "must be >= 1");
    if (!(qp->noise_std >= 0.0)) invalid("problem.qp.noise_std", "must be >= 0");
    if (config.inner == InnerChoice::kExact) {
      invalid("inner", "quadratic constraints have no analytic projection");
    }
  } else {
    const auto& battery = std::get<BatterySpec>(config.problem);
    if (battery.name != "convex_box" && battery.name != "ball_projection" &&
        battery.name != "nonconvex_box") {
      invalid("problem.battery.name", "unknown battery problem '" + battery.name + "'");
    }
    if (!(battery.noise_std >= 0.0)) {
      invalid("problem.battery.noise_std", "must be >= 0");
    }
  }
}

ReplicationResult run_replication(const ExperimentConfig& config,
                                  int replication) {
  const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(replication);
  const BuiltProblem built = build_problem(config, seed);
  const CompositeProblem& problem = built.problem;
  const auto inner = make_inner(config.inner);
  const double L = problem.constants.L;
  const Vector x0 = problem.constraint_set()->slater_point();

  ReplicationResult row;
  row.replication = replication;
  row.n = problem.dim();
  row.m = built.constraints;
  row.noise_std = std::holds_alternative<QpSpec>(config.problem)
                      ? std::get<QpSpec>(config.problem).noise_std
                      : std::get<BatterySpec>(config.problem).noise_std;
  row.horizon = config.horizon;

  const StepSchedule schedule = accelerated_schedule(L, config.horizon);
  Rng run_rng = stream(seed, 1);
  const auto start = std::chrono::steady_clock::now();
  const IpagTrace trace = run_constrained(problem, schedule, *inner, x0,
                                          std::nullopt, config.horizon, run_rng);
  row.cpu_s = seconds_since(start);

  Rng eval_rng = stream(seed, 3);
  row.f_final = objective_estimate(built, trace.output, eval_rng);
  row.f_best = std::numeric_limits<double>::infinity();
  for (const auto& rec : trace.records) {
    for (const Vector* v : {&rec.x, &rec.y, &rec.z}) {
      row.f_best = std::min(row.f_best, problem.objective.value(*v));
    }
  }
  row.infeasibility = problem.constraint_set()->max_violation(trace.output);
  row.grad_samples = trace.gradient_samples;
  row.constraint_evals = trace.constraint_evals;
  row.inner_iterations = trace.inner_iterations;
  row.residual_curve = min_residual_curve(trace);
  row.min_residual_at_T = row.residual_curve.back().second;
  row.output_index = trace.output_index;
  row.stationarity = config.residual_report
                         ? stationarity_residual(problem, trace.output).residual_sq
                         : std::numeric_limits<double>::quiet_NaN();

  if (config.baseline) {
    Rng baseline_rng = stream(seed, 2);
    const BaselineOptions options = matched_baseline(L, config.horizon);
    const auto b_start = std::chrono::steady_clock::now();
    const BaselineTrace b =
        run_projected_sgd(problem, options, *inner, x0, baseline_rng);
    row.baseline_cpu_s = seconds_since(b_start);
    row.has_baseline = true;
    row.baseline_f_final = objective_estimate(built, b.output, eval_rng);
    row.baseline_infeasibility = problem.constraint_set()->max_violation(b.output);
    row.baseline_grad_samples = b.gradient_samples;
  }
  return row;
}

RunReport run_experiment(const ExperimentConfig& config, int parallel) {
  validate_config(config);
  if (parallel < 1) invalid("parallel", "must be >= 1");
  RunReport report;
  report.config = config;
  report.rows.resize(static_cast<std::size_t>(config.replications));

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int r = next++; r < config.replications; r = next++) {
      try {
        report.rows[static_cast<std::size_t>(r)] = run_replication(config, r);
      } catch (const Error& e) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) {
          failure = std::make_exception_ptr(Error(
              e.code(), "replication " + std::to_string(r) + ": " + e.what()));
        }
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int threads = std::min(parallel, config.replications);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return report;
}

Summary RunReport::f_final() const {
  return summarize(rows, &ReplicationResult::f_final);
}
Summary RunReport::infeasibility() const {
  return summarize(rows, &ReplicationResult::infeasibility);
}
Summary RunReport::cpu_s() const {
  return summarize(rows, &ReplicationResult::cpu_s);
}

void write_csv(const RunReport& report, std::ostream& out) {
  const bool baseline = report.config.baseline;
  out << "replication,n,m,std,T,f_final,infeas,cpu_s,grad_samples,"
         "constraint_evals,min_residual_at_T,f_best,stationarity,output_index";
  if (baseline) {
    out << ",baseline_f_final,baseline_infeas,baseline_cpu_s,"
           "baseline_grad_samples";
  }
  out << '\n';
  for (const auto& r : report.rows) {
    out << r.replication << ',' << r.n << ',' << r.m << ',';
    write_number(out, r.noise_std);
    out << ',' << r.horizon << ',';
    write_number(out, r.f_final);
    out << ',';
    write_number(out, r.infeasibility);
    out << ',';
    write_number(out, r.cpu_s);
    out << ',' << r.grad_samples << ',' << r.constraint_evals << ',';
    write_number(out, r.min_residual_at_T);
    out << ',';
    write_number(out, r.f_best);
    out << ',';
    write_number(out, r.stationarity);
    out << ',' << r.output_index;
    if (baseline) {
      out << ',';
      write_number(out, r.baseline_f_final);
      out << ',';
      write_number(out, r.baseline_infeasibility);
      out << ',';
      write_number(out, r.baseline_cpu_s);
      out << ',' << r.baseline_grad_samples;
    }
    out << '\n';
  }
}

void emit_csv(const RunReport& report, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorCode::kIoError, "cannot open '" + path + "'");
  write_csv(report, file);
  file.flush();
  if (!file) throw Error(ErrorCode::kIoError, "failed writing '" + path + "'");
}

void write_residual_curve(const ReplicationResult& row, std::ostream& out) {
  out << "T,min_residual\n";
  for (const auto& [t, value] : row.residual_curve) {
    out << t << ',';
    write_number(out, value);
    out << '\n';
  }
}

std::string residual_curve_path(const std::string& base, int replication) {
  const auto slash = base.find_last_of('/');
  const auto dot = base.find_last_of('.');
  const bool has_ext = dot != std::string::npos &&
                       (slash == std::string::npos || dot > slash);
  const std::string stem = has_ext ? base.substr(0, dot) : base;
  const std::string ext = has_ext ? base.substr(dot) : ".csv";
  return stem + "_r" + std::to_string(replication) + ext;
}

}  // namespace ipag
