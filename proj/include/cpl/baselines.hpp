#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cpl/sampler.hpp"

namespace cpl {

/// Largest grid the discrete projection accepts.
inline constexpr std::size_t kMaxGridPoints = std::size_t{1} << 20;

/// Uniform tensor grid over a domain box.
struct GridSpec {
  std::vector<std::size_t> n;
  std::vector<double> dx;

  /// n_k points per axis over the box; spacing extent / n_k (cell-centred).
  static GridSpec over(const Domain& domain, std::span<const std::size_t> per_dim);

  [[nodiscard]] std::size_t total() const;
  /// Hypervolume element prod dx_k.
  [[nodiscard]] double cell_volume() const;
};

/// Bytes of tape storage a through-projection step over `n` points would need.
std::size_t projection_memory_estimate(std::size_t n, std::size_t nodes_per_point);

/// Throws ConfigError quoting the estimate when n exceeds kMaxGridPoints.
void preflight_grid(std::size_t n, std::size_t nodes_per_point);

/// Nearest point with dV * sum y = c1.
std::vector<double> proj_linear(std::span<const double> field, double dv, double c1);

/// Nearest point with dV * sum y^2 = c2. InputError("degenerate scaling")
/// for a zero field; InputError for c2 <= 0.
std::vector<double> proj_quadratic(std::span<const double> field, double dv, double c2);

/// Nearest point satisfying both Riemann constraints:
/// y = m + s (u - mean u), m = c1 / (n dV), s^2 = (c2/dV - n m^2) / sum (u - mean u)^2.
/// NumericalError("infeasible targets") or InputError("degenerate") on bad input.
std::vector<double> proj_combined(std::span<const double> field, double dv, double c1, double c2);

/// The (scale, shift) pair applied by proj_combined: y = s u + (m - s mean u).
std::pair<double, double> combined_affine(std::span<const double> field, double dv, double c1, double c2);

/// proj_combined with dV = |X| / n on an arbitrary cloud.
std::vector<double> mc_misuse_projection(std::span<const double> field, double volume, double c1, double c2);

/// lambda * mean_t (c(t) - c_hat(t))^2.
double soft_constraint_loss(std::span<const double> c_hat, std::span<const double> c_true, double lambda);

}  // namespace cpl
