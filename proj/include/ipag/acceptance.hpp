#pragma once

#include <functional>
#include <string>
#include <vector>

namespace ipag {

/// Outcome of one end-to-end acceptance check.
struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;  // the measured quantities, one line
  double seconds = 0.0;
};

struct AcceptanceCheck {
  int id;
  std::string name;
  std::function<CriterionResult()> run;
};

/// The nine acceptance criteria, in order.
std::vector<AcceptanceCheck> acceptance_checks();

CriterionResult check_schedule_fidelity();
CriterionResult check_output_distribution();
CriterionResult check_inner_solver_contract();
CriterionResult check_unconditional_feasibility();
CriterionResult check_residual_decay();
CriterionResult check_oracle_accounting();
CriterionResult check_prox_audit();
CriterionResult check_oracle_moments();
CriterionResult check_baseline_comparison();

/// "PASS [3] inner-solver contract (12.3 s): ..." style line.
std::string format_result(const CriterionResult& result);

}  // namespace ipag
