#pragma once

#include <string>
#include <vector>

namespace nqsite {

// One verification criterion outcome.  `detail` carries the measured
// worst-case quantity and its bound so failures are diagnosable from the
// one-line report.
struct CheckResult {
  int criterion = 0;
  std::string name;
  bool passed = false;
  std::string detail;
};

// The numbered checks.  Tolerances are fixed inside each check.
CheckResult check_moment_identities();   // 1: exact sums vs matrix expectations
CheckResult check_gradients_fd();        // 2: gradients vs central differences
CheckResult check_loss_equivalence();    // 3: overlap loss ~ energy loss identity
CheckResult check_time_step();           // 4: quadratic solve vs dense grid scan
CheckResult check_sampler_fidelity();    // 5: MCMC distribution vs |psi|^2
CheckResult check_ground_state();        // 6: training reaches the ED energy
CheckResult check_loss_stability();      // 7: seed spread and epoch-boundary jumps
CheckResult check_determinism(const std::string& cli_path);  // 8: byte-stable logs
CheckResult check_monotonic_descent();   // 9: epoch energies strictly decrease

// Runs one criterion by number (1-9).  Criterion 8 needs the runner binary.
CheckResult run_criterion(int number, const std::string& cli_path = "");

std::vector<CheckResult> run_all_criteria(const std::string& cli_path = "");

// "criterion N (name): PASS|FAIL - detail"
std::string format_result(const CheckResult& r);

}  // namespace nqsite
