#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cpl/pde.hpp"
#include "cpl/sampler.hpp"

namespace cpl {

struct ReferenceConfig {
  std::size_t nx = 512;      // vertices per axis, endpoints included
  double dt = 0.0;           // 0 picks the largest stable step
  double t_end = 0.0;        // 0 uses the problem horizon
  std::size_t stamps = 65;   // stored snapshots, t = 0 and t_end included
  double safety = 0.9;       // fraction of the RK4 stability limit
};

/// Method-of-lines solution on a vertex grid with stored snapshots.
struct ReferenceSolution {
  std::string problem;
  std::size_t dim = 1;
  std::size_t nx = 0;
  std::vector<double> lower;
  std::vector<double> dx;
  double dt = 0.0;
  std::vector<double> times;
  std::vector<std::vector<double>> snapshots;  // row-major, last axis fastest
  std::vector<double> c1;
  std::vector<double> c2;

  [[nodiscard]] std::size_t points() const;
  /// Grid vertices as a cloud in the same order as the snapshots.
  [[nodiscard]] PointCloud grid_cloud() const;
};

/// True when solve_reference supports the named problem.
bool has_reference_solver(const std::string& problem);

/// Largest stable RK4 step for the problem's stiffest term on spacing dx,
/// scaled by `safety`.
double stable_dt(const PDEProblem& problem, double dx, double safety = 0.9);

/// Explicit solve. ConfigError on CFL violation or an unsupported problem;
/// NumericalError when |u| exceeds 1e6.
ReferenceSolution solve_reference(const PDEProblem& problem, const ReferenceConfig& config = {});

/// Trapezoid-rule invariants at every stored stamp.
InvariantTable invariant_table(const ReferenceSolution& reference);

/// Stable key over (problem, constants, grid, step, horizon, stamps).
std::uint64_t reference_hash(const PDEProblem& problem, const ReferenceConfig& config);

void save_reference(const ReferenceSolution& reference, std::uint64_t hash, const std::filesystem::path& path);
/// Returns false when the file is missing, malformed or has another hash.
bool load_reference(const std::filesystem::path& path, std::uint64_t hash, ReferenceSolution& out);

/// Reuses `<dir>/<problem>_nx<nx>.ref` when its hash matches, else solves and
/// writes it. `cache_hit` reports which happened.
ReferenceSolution load_or_solve(const PDEProblem& problem, const ReferenceConfig& config,
                                const std::filesystem::path& dir, bool* cache_hit = nullptr);

/// Trapezoid integrals (int u, int u^2) of one vertex-grid field.
std::pair<double, double> trapezoid_invariants(std::span<const double> u, std::size_t dim, std::size_t nx,
                                               std::span<const double> dx);

}  // namespace cpl
