#pragma once

#include <functional>
#include <string>
#include <vector>

namespace cpl {

/// Outcome of one invariant check: pass when observed <= tolerance.
struct CheckResult {
  std::string module;
  std::string name;
  double observed = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  /// Deliberate bug planted in a fixture to prove the suite catches it.
  /// Supported: "jacobian_sign" (flips d alpha / d mu2 before its FD check).
  std::string inject_fault;
};

/// Names accepted by VerifyOptions::inject_fault.
std::vector<std::string> fault_names();

/// Runs every module's invariant checks. `on_result` fires as each finishes.
std::vector<CheckResult> run_verify(const VerifyOptions& options = {},
                                    const std::function<void(const CheckResult&)>& on_result = {});

}  // namespace cpl
