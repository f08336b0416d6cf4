#include "cpl/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>

#include "cpl/baselines.hpp"
#include "cpl/errors.hpp"
#include "cpl/mlp.hpp"
#include "cpl/trainer.hpp"

namespace cpl {
namespace {

namespace fs = std::filesystem;

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

void write_resolved(const RunConfig& config) {
  open_output(config.out_dir / "config.resolved") << render_config(config);
}

std::string metrics_row(const MetricsRecord& r) {
  return std::to_string(r.epoch) + "," + csv_number(r.loss) + "," + csv_number(r.error_u) + "," +
         csv_number(r.error_c1) + "," + csv_number(r.error_c2) + "," + std::to_string(r.tape_nodes) + "," +
         csv_number(r.seconds);
}

struct SweepRow {
  std::string value;
  std::string status = "ok";
  MetricsRecord record;
  double rel_c1 = 0.0;
  double rel_c2 = 0.0;
  std::size_t tape_nodes = 0;
  double seconds = 0.0;
  std::size_t estimate = 0;
};

SweepRow run_sweep_point(const RunConfig& base, const std::string& axis, const std::string& value) {
  SweepRow row;
  row.value = value;
  try {
    RunConfig rc = sweep_point(base, axis, value);
    rc.use_reference = base.use_reference;
    std::ostringstream quiet;
    row.estimate = estimate_step_bytes(make_problem(rc.train.problem, rc.train.problem_options), rc.train);
    if (row.estimate > kSweepMemoryCap) {
      row.status = "refused";
      return row;
    }
    const PreparedProblem prepared = prepare_problem(rc, quiet);
    const auto start = std::chrono::steady_clock::now();
    const TrainResult result = train(prepared.problem, rc.train, prepared.reference.get());
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    row.record = result.history.back();
    // relative form keeps errors comparable when c grows with the dimension
    double s1 = 0.0;
    double s2 = 0.0;
    for (double t : result.table_times) {
      const auto [c1, c2] = invariant_targets(prepared.problem, t);
      s1 += std::abs(c1);
      s2 += std::abs(c2);
    }
    const double n_t = static_cast<double>(result.table_times.size());
    row.rel_c1 = row.record.error_c1 / std::max(s1 / n_t, 1e-300);
    row.rel_c2 = row.record.error_c2 / std::max(s2 / n_t, 1e-300);
    row.tape_nodes = result.max_tape_nodes;
  } catch (const ConfigError&) {
    row.status = "refused";
  } catch (const NumericalError&) {
    row.status = "diverged";
  }
  return row;
}

}  // namespace

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

PreparedProblem prepare_problem(const RunConfig& config, std::ostream& log) {
  PreparedProblem out;
  out.problem = make_problem(config.train.problem, config.train.problem_options);
  config.train.validate(out.problem);
  const bool want = config.use_reference || out.problem.needs_table();
  if (!want || !has_reference_solver(out.problem.name)) {
    if (out.problem.needs_table()) throw ConfigError(out.problem.name + ": invariant targets need a reference solve");
    return out;
  }
  bool hit = false;
  const fs::path dir = config.resolved_cache_dir();
  fs::create_directories(dir);
  auto ref = std::make_shared<ReferenceSolution>(load_or_solve(out.problem, config.reference, dir, &hit));
  log << "reference: " << (hit ? "cache hit " : "solved and cached ") << (dir / (out.problem.name + "_nx" +
                                                                               std::to_string(config.reference.nx) + ".ref")).string()
      << "\n";
  out.problem.table = std::make_shared<InvariantTable>(invariant_table(*ref));
  out.reference = std::move(ref);
  return out;
}

std::size_t estimate_step_bytes(const PDEProblem& problem, const TrainConfig& config) {
  // nodes of one jet evaluation through the network, per coefficient
  const double per_coefficient = static_cast<double>(config.layers * config.width) * 3.0;
  std::size_t coords = 0;
  for (std::size_t k = 0; k <= problem.dim; ++k) coords += problem.required_order(k) > 0 ? 1 : 0;
  int order = 1;
  for (std::size_t k = 0; k <= problem.dim; ++k) order = std::max(order, problem.required_order(k));
  const double points = static_cast<double>(config.batch + config.ic_points +
                                            config.bc_points * std::min(config.time_slices, config.batch));
  double nodes = points * static_cast<double>(coords) * (order + 1) * per_coefficient;
  double bytes = nodes * 37.0;
  if (config.method == Method::kSdifp) bytes += static_cast<double>(config.cloud) * static_cast<double>(problem.dim) * 8.0;
  if (config.method == Method::kDiscreteProj && config.projection == ProjectionMode::kGrid) {
    const double grid = std::pow(static_cast<double>(config.grid_per_dim), static_cast<double>(problem.dim));
    bytes += static_cast<double>(projection_memory_estimate(
        grid > 1e15 ? std::size_t{1} << 50 : static_cast<std::size_t>(grid), config.layers * config.width * 2));
  }
  return bytes > 1.8e19 ? std::numeric_limits<std::size_t>::max() : static_cast<std::size_t>(bytes);
}

RunConfig sweep_point(const RunConfig& base, const std::string& axis, const std::string& value) {
  RunConfig rc = base;
  if (axis == "dimension") {
    if (base.train.problem != "sine_gordon_nd" && base.train.problem != "fokker_planck_linear_nd") {
      throw ConfigError("dimension sweeps need a *_nd problem, not " + base.train.problem);
    }
    set_config_value(rc, "dim", value);
  } else if (axis == "batch") {
    set_config_value(rc, "batch", value);
  } else if (axis == "cloud_size") {
    set_config_value(rc, "cloud", value);
  } else if (axis == "subset_size") {
    set_config_value(rc, "subset_i", value);
    set_config_value(rc, "subset_j", value);
  } else {
    throw ConfigError("unknown sweep axis '" + axis + "' (dimension, batch, cloud_size, subset_size)");
  }
  return rc;
}

int cmd_train(const RunConfig& config, std::ostream& log) {
  const PreparedProblem prepared = prepare_problem(config, log);
  write_resolved(config);
  std::ofstream metrics = open_output(config.out_dir / "metrics.csv");
  metrics << kMetricsHeader << "\n";
  const TrainResult result = train(prepared.problem, config.train, prepared.reference.get(), [&](const MetricsRecord& r) {
    metrics << metrics_row(r) << "\n";
    metrics.flush();
    log << "epoch " << r.epoch << " loss " << csv_number(r.loss) << " error_c1 " << csv_number(r.error_c1)
        << " error_u " << csv_number(r.error_u) << "\n";
  });
  save_checkpoint(result.params, config.out_dir / "checkpoint.bin");

  std::ofstream table = open_output(config.out_dir / "alpha_beta.csv");
  table << "t,alpha,beta\n";
  for (const AffineParams& a : result.table) table << csv_number(a.t) << "," << csv_number(a.alpha) << "," << csv_number(a.beta) << "\n";

  const EvalContext ctx = make_eval_context(prepared.problem, config.train, nullptr);
  const auto [c1_hat, c2_hat] = projected_invariants(result.params, prepared.problem, result.table, ctx.holdout);
  std::ofstream inv = open_output(config.out_dir / "invariants.csv");
  inv << "t,c1_target,c2_target,c1_model,c2_model\n";
  for (std::size_t k = 0; k < result.table.size(); ++k) {
    const auto [c1, c2] = invariant_targets(prepared.problem, result.table[k].t);
    inv << csv_number(result.table[k].t) << "," << csv_number(c1) << "," << csv_number(c2) << "," << csv_number(c1_hat[k])
        << "," << csv_number(c2_hat[k]) << "\n";
  }
  log << "wrote " << (config.out_dir / "metrics.csv").string() << "\n";
  return kExitOk;
}

int cmd_verify(const VerifyOptions& options, std::ostream& out) {
  std::size_t failed = 0;
  const auto results = run_verify(options, [&](const CheckResult& r) {
    char line[256];
    std::snprintf(line, sizeof line, "%s  %-10s %-40s observed %.3e  tolerance %.1e", r.passed ? "PASS" : "FAIL",
                  r.module.c_str(), r.name.c_str(), r.observed, r.tolerance);
    out << line << (r.detail.empty() ? "" : "  (" + r.detail + ")") << "\n";
    if (!r.passed) ++failed;
  });
  out << results.size() << " checks, " << results.size() - failed << " passed, " << failed << " failed\n";
  return failed == 0 ? kExitOk : kExitVerify;
}

int cmd_sweep(const RunConfig& config, std::ostream& log) {
  if (config.sweep_values.empty()) throw ConfigError("sweep: no values given");
  // axis and values are checked before any compute
  for (const auto& v : config.sweep_values) (void)sweep_point(config, config.sweep_axis, v);
  write_resolved(config);
  std::vector<SweepRow> rows(config.sweep_values.size());
  const std::size_t k = std::max<std::size_t>(1, config.parallel);
  for (std::size_t begin = 0; begin < rows.size(); begin += k) {
    std::vector<std::future<SweepRow>> jobs;
    for (std::size_t i = begin; i < std::min(rows.size(), begin + k); ++i) {
      jobs.push_back(std::async(k == 1 ? std::launch::deferred : std::launch::async, run_sweep_point, std::cref(config),
                                std::cref(config.sweep_axis), std::cref(config.sweep_values[i])));
    }
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      rows[begin + i] = jobs[i].get();
      log << "sweep " << config.sweep_axis << "=" << rows[begin + i].value << " " << rows[begin + i].status << "\n";
    }
  }
  std::ofstream out = open_output(config.out_dir / ("sweep_" + config.sweep_axis + ".csv"));
  out << kSweepHeader << "\n";
  for (const SweepRow& r : rows) {
    const bool ok = r.status == "ok";
    const double nan = std::nan("");
    out << config.sweep_axis << "," << r.value << "," << r.status << "," << csv_number(ok ? r.record.error_c1 : nan) << ","
        << csv_number(ok ? r.record.error_c2 : nan) << "," << csv_number(ok ? r.rel_c1 : nan) << ","
        << csv_number(ok ? r.rel_c2 : nan) << "," << csv_number(ok ? r.record.error_u : nan) << ","
        << (ok ? std::to_string(r.tape_nodes) : "0") << "," << csv_number(r.seconds) << "," << r.estimate << "\n";
  }
  return kExitOk;
}

int cmd_reference(const RunConfig& config, std::ostream& log) {
  const PDEProblem problem = make_problem(config.train.problem, config.train.problem_options);
  const fs::path dir = config.resolved_cache_dir();
  fs::create_directories(dir);
  write_resolved(config);
  bool hit = false;
  const ReferenceSolution ref = load_or_solve(problem, config.reference, dir, &hit);
  log << "reference: " << (hit ? "cache hit, no recompute: " : "solved and cached: ")
      << (dir / (problem.name + "_nx" + std::to_string(config.reference.nx) + ".ref")).string() << "\n";
  std::ofstream out = open_output(config.out_dir / ("reference_" + problem.name + ".csv"));
  out << "t,c1,c2\n";
  for (std::size_t s = 0; s < ref.times.size(); ++s) {
    out << csv_number(ref.times[s]) << "," << csv_number(ref.c1[s]) << "," << csv_number(ref.c2[s]) << "\n";
  }
  return kExitOk;
}

int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InputError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const RangeError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical abort: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DomainError& e) {
    err << "numerical abort: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace cpl
