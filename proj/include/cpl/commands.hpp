#pragma once

#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "cpl/config.hpp"
#include "cpl/pde.hpp"
#include "cpl/refsolve.hpp"
#include "cpl/verify.hpp"

namespace cpl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitVerify = 4;

inline const std::string kMetricsHeader = "epoch,loss,error_u,error_c1,error_c2,tape_nodes,seconds";
inline const std::string kSweepHeader = "axis,value,status,error_c1,error_c2,rel_error_c1,rel_error_c2,error_u,tape_nodes,seconds,estimate_bytes";

/// Problem with its invariant table attached plus the reference used for
/// Error_u (null when the problem has no solver or references are off).
struct PreparedProblem {
  PDEProblem problem;
  std::shared_ptr<const ReferenceSolution> reference;
};

PreparedProblem prepare_problem(const RunConfig& config, std::ostream& log);

/// Rough bytes for one training step: tape nodes, moment cloud and grid.
std::size_t estimate_step_bytes(const PDEProblem& problem, const TrainConfig& config);
inline constexpr std::size_t kSweepMemoryCap = std::size_t{4} << 30;

/// Applies one sweep value to a copy of the base configuration.
RunConfig sweep_point(const RunConfig& base, const std::string& axis, const std::string& value);

/// Formats a double for CSV output (shortest round-trip form, `nan` for NaN).
std::string csv_number(double v);

int cmd_train(const RunConfig& config, std::ostream& log);
int cmd_verify(const VerifyOptions& options, std::ostream& out);
int cmd_sweep(const RunConfig& config, std::ostream& log);
int cmd_reference(const RunConfig& config, std::ostream& log);

/// Runs a command, mapping ConfigError (and other input errors) to exit 2 and
/// NumericalError to exit 3, with the message on `err`.
int run_guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace cpl
