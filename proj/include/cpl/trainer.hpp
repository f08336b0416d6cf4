#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cpl/mlp.hpp"
#include "cpl/pde.hpp"
#include "cpl/refsolve.hpp"
#include "cpl/sampler.hpp"
#include "cpl/sdifp.hpp"

namespace cpl {

enum class Method { kVanilla, kSoft, kDiscreteProj, kSdifp };
enum class Estimator { kFull, kDsUge, kSoo };
/// Where the discrete projection takes its field values: the slice's random
/// collocation points (dV = |X| / n) or a cell-centred grid.
enum class ProjectionMode { kCloud, kGrid };

Method parse_method(const std::string& s);
Estimator parse_estimator(const std::string& s);
ProjectionMode parse_projection_mode(const std::string& s);
std::string to_string(Method m);
std::string to_string(Estimator e);
std::string to_string(ProjectionMode m);

struct TrainConfig {
  std::string problem = "advection1d";
  ProblemOptions problem_options;
  Method method = Method::kSdifp;
  Estimator estimator = Estimator::kFull;
  std::size_t epochs = 2000;       // 0 evaluates the initial network only
  double lr0 = 1e-3;
  std::size_t batch = 100;        // residual collocation points per step
  std::size_t cloud = 10000;      // detached moment cloud M
  std::size_t subset_i = 0;       // |I|; 0 means N_L
  std::size_t subset_j = 0;       // |J|; 0 means N_L
  std::size_t time_slices = 8;    // n_t distinct times per step
  std::size_t ic_points = 100;
  std::size_t bc_points = 16;     // per time slice
  double lambda = 1.0;            // soft-constraint weight
  std::uint64_t seed = 0;
  std::size_t width = 128;
  std::size_t layers = 4;
  bool input_scaling = false;
  bool frozen_cloud = false;      // reuse one S_MC for the whole run
  ProjectionMode projection = ProjectionMode::kCloud;
  std::size_t grid_per_dim = 64;
  bool through_projection = true; // discrete_proj: differentiate through (alpha, beta)
  std::size_t eval_every = 100;
  std::size_t eval_times = 64;
  std::size_t holdout = 16384;
  std::uint64_t holdout_skip = std::uint64_t{1} << 31;
  bool timing = false;            // record wall-clock seconds in metrics

  /// |I| and |J| resolved against N_L.
  [[nodiscard]] std::size_t size_i(std::size_t n_terms) const { return subset_i == 0 ? n_terms : subset_i; }
  [[nodiscard]] std::size_t size_j(std::size_t n_terms) const { return subset_j == 0 ? n_terms : subset_j; }
  /// ConfigError on any inconsistent setting.
  void validate(const PDEProblem& problem) const;
};

NetworkConfig network_config(const TrainConfig& config, const PDEProblem& problem);

/// One time slice of a step. The initial slice (t = 0) carries the IC points
/// as its batch; other slices carry residual collocation points.
struct Slice {
  double t = 0.0;
  bool initial = false;
  PointCloud batch;
  std::vector<BoundaryPoint> boundary;
};

struct StepSample {
  std::vector<Slice> slices;
  PointCloud moment_cloud;  // detached S_MC in domain coordinates
  PointCloud grid;          // discrete_proj grid mode
  IndexSets sets;
};

/// Draws slices, collocation, boundary points, S_MC and index sets for step `step`.
StepSample draw_sample(const PDEProblem& problem, const TrainConfig& config, std::size_t step, SeededRng& rng);

struct StepResult {
  std::vector<double> grad;
  double loss = 0.0;  // 1/2 mean F^2 over the residual batch + penalties
  std::size_t tape_nodes = 0;
  std::vector<AffineParams> affine;  // per slice
  std::vector<MomentEstimate> moments;
};

/// Gradient of one step under config.method / config.estimator. A workspace
/// tape, when given, is cleared and reused to keep its allocation.
StepResult compute_step(const MLPParams& params, const PDEProblem& problem, const TrainConfig& config,
                        const StepSample& sample, Tape* workspace = nullptr);

StepResult step_sdifp(const MLPParams& params, const PDEProblem& problem, const TrainConfig& config,
                      std::size_t step, SeededRng& rng);
StepResult step_soo(const MLPParams& params, const PDEProblem& problem, const TrainConfig& config,
                    std::size_t step, SeededRng& rng);
StepResult step_baseline(const MLPParams& params, const PDEProblem& problem, const TrainConfig& config,
                         std::size_t step, SeededRng& rng, Method method);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

/// lr0 * (1 - epoch / epochs).
double learning_rate(const TrainConfig& config, std::size_t epoch);
void adam_update(std::vector<double>& params, AdamState& state, std::span<const double> grad, double lr);

struct MetricsRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double error_u = std::numeric_limits<double>::quiet_NaN();
  double error_c1 = 0.0;
  double error_c2 = 0.0;
  std::size_t tape_nodes = 0;
  double seconds = 0.0;
};

/// (alpha, beta) at each time: SDIFP from the Sobol training cloud at skip 0,
/// discrete_proj from a fresh random batch-sized cloud, identity otherwise.
std::vector<AffineParams> affine_table(const MLPParams& params, const PDEProblem& problem,
                                       const TrainConfig& config, std::span<const double> times);

struct EvalContext {
  std::vector<double> times;  // invariant-error time grid
  PointCloud holdout;         // held-out cloud in domain coordinates
  const ReferenceSolution* reference = nullptr;
};

EvalContext make_eval_context(const PDEProblem& problem, const TrainConfig& config,
                              const ReferenceSolution* reference);

/// Error_u against the reference snapshots (NaN without one) and mean
/// absolute invariant errors on the held-out cloud.
MetricsRecord evaluate(const MLPParams& params, const PDEProblem& problem, const TrainConfig& config,
                       const EvalContext& context);

/// Conserved quantities of the projected field on a cloud at each time.
std::pair<std::vector<double>, std::vector<double>> projected_invariants(
    const MLPParams& params, const PDEProblem& problem, std::span<const AffineParams> table,
    const PointCloud& cloud);

struct TrainResult {
  MLPParams params;
  std::vector<MetricsRecord> history;
  std::vector<AffineParams> table;
  std::vector<double> table_times;
  std::size_t max_tape_nodes = 0;
};

/// Full run. `on_record` fires after each evaluation.
TrainResult train(const PDEProblem& problem, const TrainConfig& config, const ReferenceSolution* reference,
                  const std::function<void(const MetricsRecord&)>& on_record = {});

/// Tape nodes of a single step (max concurrent tape size).
std::size_t memory_account(const StepResult& result);

}  // namespace cpl
