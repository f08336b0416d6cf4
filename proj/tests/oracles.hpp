#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "cpl/mlp.hpp"

namespace oracle {

inline double rel_err(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central difference with step h.
inline double central(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// k-th derivative by central differences, Richardson-extrapolated once.
inline double derivative(const std::function<double(double)>& f, double x, int k, double h) {
  auto stencil = [&](double s) {
    switch (k) {
      case 1: return (f(x + s) - f(x - s)) / (2.0 * s);
      case 2: return (f(x + s) - 2.0 * f(x) + f(x - s)) / (s * s);
      default: return (f(x + 2.0 * s) - 2.0 * f(x + s) + 2.0 * f(x - s) - f(x - 2.0 * s)) / (2.0 * s * s * s);
    }
  };
  return (4.0 * stencil(h / 2.0) - stencil(h)) / 3.0;
}

/// Gradient of a scalar map of the parameter vector by central differences,
/// step 1e-5 max(1, |theta_k|).
inline std::vector<double> fd_gradient(const cpl::MLPParams& params,
                                       const std::function<double(const cpl::MLPParams&)>& f) {
  std::vector<double> g(params.size());
  cpl::MLPParams p = params;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double base = p.values[k];
    const double h = 1e-5 * std::max(1.0, std::abs(base));
    p.values[k] = base + h;
    const double up = f(p);
    p.values[k] = base - h;
    const double down = f(p);
    p.values[k] = base;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Max over entries of |a - b| / max(|b|_inf, floor): gradient agreement
/// relative to the gradient's scale.
inline double scaled_max_err(std::span<const double> a, std::span<const double> b, double floor = 1e-12) {
  double num = 0.0;
  double den = floor;
  for (std::size_t k = 0; k < a.size(); ++k) {
    num = std::max(num, std::abs(a[k] - b[k]));
    den = std::max(den, std::abs(b[k]));
  }
  return num / den;
}

inline cpl::MLPParams net(std::size_t dim, std::size_t layers, std::size_t width, std::uint64_t seed) {
  cpl::NetworkConfig nc;
  nc.spatial_dim = dim;
  nc.hidden_layers = layers;
  nc.width = width;
  nc.seed = seed;
  return cpl::init_params(nc);
}

}  // namespace oracle
