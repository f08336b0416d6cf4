#include "cpl/baselines.hpp"

#include <cmath>
#include <string>

#include "cpl/errors.hpp"

namespace cpl {

namespace {

double sum_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

GridSpec GridSpec::over(const Domain& domain, std::span<const std::size_t> per_dim) {
  if (per_dim.size() != domain.dim()) throw ConfigError("grid: need one count per dimension");
  GridSpec g;
  for (std::size_t k = 0; k < per_dim.size(); ++k) {
    if (per_dim[k] < 1) throw ConfigError("grid: counts must be >= 1");
    g.n.push_back(per_dim[k]);
    g.dx.push_back(domain.extent(k) / static_cast<double>(per_dim[k]));
  }
  if (g.total() < 2) throw ConfigError("grid: need at least two points");
  return g;
}

std::size_t GridSpec::total() const {
  std::size_t t = 1;
  for (std::size_t c : n) t *= c;
  return t;
}

double GridSpec::cell_volume() const {
  double v = 1.0;
  for (double h : dx) v *= h;
  return v;
}

std::size_t projection_memory_estimate(std::size_t n, std::size_t nodes_per_point) {
  // value + one edge (parent index and partial) per node, rough average fan-in 2
  constexpr std::size_t kBytesPerNode = 8 + 1 + 4 + 2 * (4 + 8);
  return n * nodes_per_point * kBytesPerNode;
}

void preflight_grid(std::size_t n, std::size_t nodes_per_point) {
  if (n <= kMaxGridPoints) return;
  const double gib = static_cast<double>(projection_memory_estimate(n, nodes_per_point)) / (1024.0 * 1024.0 * 1024.0);
  throw ConfigError("discrete projection over " + std::to_string(n) + " points exceeds the cap of " +
                    std::to_string(kMaxGridPoints) + " (estimated tape memory " + std::to_string(gib) + " GiB)");
}

std::vector<double> proj_linear(std::span<const double> field, double dv, double c1) {
  if (field.empty()) throw InputError("proj_linear: empty field");
  const double n = static_cast<double>(field.size());
  const double shift = c1 / (n * dv) - sum_of(field) / n;
  std::vector<double> y(field.begin(), field.end());
  for (double& v : y) v += shift;
  return y;
}

std::vector<double> proj_quadratic(std::span<const double> field, double dv, double c2) {
  if (!(c2 > 0.0)) throw InputError("proj_quadratic: target must be positive");
  double ss = 0.0;
  for (double v : field) ss += v * v;
  if (!(ss > 0.0)) throw InputError("proj_quadratic: degenerate scaling (zero field)");
  const double s = std::sqrt(c2 / (dv * ss));
  std::vector<double> y(field.begin(), field.end());
  for (double& v : y) v *= s;
  return y;
}

std::pair<double, double> combined_affine(std::span<const double> field, double dv, double c1, double c2) {
  if (field.size() < 2) throw InputError("proj_combined: need at least two values");
  const double n = static_cast<double>(field.size());
  const double m = c1 / (n * dv);
  const double spread = c2 / dv - n * m * m;
  if (!(spread > 0.0)) throw NumericalError("proj_combined: infeasible targets");
  const double mean = sum_of(field) / n;
  double ss = 0.0;
  for (double v : field) ss += (v - mean) * (v - mean);
  if (!(ss > 0.0)) throw InputError("proj_combined: degenerate (zero-variance field)");
  const double s = std::sqrt(spread / ss);
  return {s, m - s * mean};
}

std::vector<double> proj_combined(std::span<const double> field, double dv, double c1, double c2) {
  const double s = combined_affine(field, dv, c1, c2).first;
  const double n = static_cast<double>(field.size());
  const double m = c1 / (n * dv);
  const double mean = sum_of(field) / n;
  std::vector<double> y;
  y.reserve(field.size());
  for (double v : field) y.push_back(m + s * (v - mean));
  return y;
}

std::vector<double> mc_misuse_projection(std::span<const double> field, double volume, double c1, double c2) {
  if (field.empty()) throw InputError("mc_misuse_projection: empty field");
  return proj_combined(field, volume / static_cast<double>(field.size()), c1, c2);
}

double soft_constraint_loss(std::span<const double> c_hat, std::span<const double> c_true, double lambda) {
  if (c_hat.size() != c_true.size() || c_hat.empty()) {
    throw InputError("soft_constraint_loss: need matching nonempty samples");
  }
  if (lambda < 0.0) throw InputError("soft_constraint_loss: lambda must be >= 0");
  double s = 0.0;
  for (std::size_t i = 0; i < c_hat.size(); ++i) s += (c_true[i] - c_hat[i]) * (c_true[i] - c_hat[i]);
  return lambda * s / static_cast<double>(c_hat.size());
}

}  // namespace cpl
