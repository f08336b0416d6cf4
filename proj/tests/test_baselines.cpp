#include <doctest.h>

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <numeric>

#include "cpl/baselines.hpp"
#include "cpl/errors.hpp"
#include "cpl/sampler.hpp"

using namespace cpl;

namespace {

double riemann_sum(std::span<const double> y, double dv) { return dv * std::accumulate(y.begin(), y.end(), 0.0); }
double riemann_sq(std::span<const double> y, double dv) {
  double s = 0.0;
  for (double v : y) s += v * v;
  return dv * s;
}

double max_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// argmin |u - y|^2 s.t. dv 1^T y = c1, via the KKT linear system.
std::vector<double> kkt_linear(std::span<const double> u, double dv, double c1) {
  const auto n = static_cast<Eigen::Index>(u.size());
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n + 1, n + 1);
  Eigen::VectorXd rhs(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 2.0;
    k(i, n) = dv;
    k(n, i) = dv;
    rhs(i) = 2.0 * u[static_cast<std::size_t>(i)];
  }
  rhs(n) = c1;
  const Eigen::VectorXd sol = k.fullPivLu().solve(rhs);
  return {sol.data(), sol.data() + n};
}

// Newton on the Lagrangian stationarity system for the sphere-hyperplane
// nearest point, started at u.
std::vector<double> kkt_combined(std::span<const double> u, double dv, double c1, double c2) {
  const auto n = static_cast<Eigen::Index>(u.size());
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n + 2);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = u[static_cast<std::size_t>(i)];
  for (int iter = 0; iter < 100; ++iter) {
    const double l1 = z(n);
    const double l2 = z(n + 1);
    Eigen::VectorXd f(n + 2);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n + 2, n + 2);
    double sum = 0.0;
    double sq = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double y = z(i);
      f(i) = 2.0 * (y - u[static_cast<std::size_t>(i)]) + l1 * dv + 2.0 * l2 * dv * y;
      jac(i, i) = 2.0 + 2.0 * l2 * dv;
      jac(i, n) = dv;
      jac(i, n + 1) = 2.0 * dv * y;
      jac(n, i) = dv;
      jac(n + 1, i) = 2.0 * dv * y;
      sum += y;
      sq += y * y;
    }
    f(n) = dv * sum - c1;
    f(n + 1) = dv * sq - c2;
    if (f.norm() < 1e-15) break;
    z -= jac.fullPivLu().solve(f);
  }
  return {z.data(), z.data() + n};
}

}  // namespace

TEST_CASE("grid spec and preflight") {
  const Domain d({0.0, 0.0}, {2.0, 1.0}, 1.0);
  const std::array<std::size_t, 2> per{4, 5};
  const GridSpec g = GridSpec::over(d, per);
  CHECK(g.total() == 20);
  CHECK(g.dx[0] == 0.5);
  CHECK(g.dx[1] == 0.2);
  CHECK(g.cell_volume() == doctest::Approx(0.1));
  CHECK_NOTHROW(preflight_grid(kMaxGridPoints, 100));
  CHECK_THROWS_AS(preflight_grid(kMaxGridPoints + 1, 100), ConfigError);
  CHECK(projection_memory_estimate(std::size_t{1} << 21, 100) > projection_memory_estimate(std::size_t{1} << 20, 100));
}

TEST_CASE("proj_linear examples and KKT oracle") {
  const std::vector<double> zero{0.0, 0.0};
  CHECK(proj_linear(zero, 1.0, 2.0) == std::vector<double>{1.0, 1.0});
  const std::vector<double> ok{0.5, 1.5, 1.0};
  CHECK(max_diff(proj_linear(ok, 0.5, 1.5), ok) <= 1e-15);

  SeededRng rng(1);
  for (int n = 0; n < 30; ++n) {
    std::vector<double> u(7);
    for (double& v : u) v = 4.0 * rng.uniform() - 2.0;
    const double dv = 0.1 + rng.uniform();
    const double c1 = 3.0 * rng.uniform() - 1.5;
    const auto y = proj_linear(u, dv, c1);
    CHECK(max_diff(y, kkt_linear(u, dv, c1)) <= 1e-10);
    CHECK(std::abs(riemann_sum(y, dv) - c1) <= 1e-12 * (1.0 + std::abs(c1)));
    CHECK(max_diff(proj_linear(y, dv, c1), y) <= 1e-12);
    std::vector<double> moved = u;
    for (double& v : moved) v += 0.75;
    CHECK(max_diff(proj_linear(moved, dv, c1), y) <= 1e-12);
  }
}

TEST_CASE("proj_quadratic examples") {
  const std::vector<double> f{3.0, 4.0};
  const auto y = proj_quadratic(f, 1.0, 1.0);
  CHECK(y[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(y[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(riemann_sq(y, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(max_diff(proj_quadratic(y, 1.0, 1.0), y) <= 1e-15);
  const std::vector<double> scaled{30.0, 40.0};
  CHECK(max_diff(proj_quadratic(scaled, 1.0, 1.0), y) <= 1e-15);
  const std::vector<double> zero{0.0, 0.0};
  CHECK_THROWS_AS(proj_quadratic(zero, 1.0, 1.0), InputError);
  CHECK_THROWS_AS(proj_quadratic(f, 1.0, 0.0), InputError);
}

TEST_CASE("proj_combined examples, errors and numeric KKT oracle on 30 instances") {
  const std::vector<double> feasible{0.0, 2.0};
  CHECK(max_diff(proj_combined(feasible, 1.0, 2.0, 4.0), feasible) <= 1e-15);
  CHECK_THROWS_AS(proj_combined(feasible, 1.0, 2.0, 1.0), NumericalError);
  const std::vector<double> flat{1.0, 1.0, 1.0};
  CHECK_THROWS_AS(proj_combined(flat, 1.0, 1.0, 2.0), InputError);

  SeededRng rng(2);
  for (int inst = 0; inst < 30; ++inst) {
    const std::size_t n = 2 + rng.below(9);
    const double dv = 0.2 + rng.uniform();
    std::vector<double> u(n);
    std::vector<double> near(n);
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = 2.0 * rng.uniform() - 1.0;
      near[i] = u[i] + 0.3 * (rng.uniform() - 0.5);
    }
    const double c1 = riemann_sum(near, dv);
    const double c2 = riemann_sq(near, dv);
    const auto y = proj_combined(u, dv, c1, c2);
    CHECK(max_diff(y, kkt_combined(u, dv, c1, c2)) <= 1e-9);
    CHECK(std::abs(riemann_sum(y, dv) - c1) <= 1e-12 * (1.0 + std::abs(c1)));
    CHECK(std::abs(riemann_sq(y, dv) - c2) <= 1e-12 * (1.0 + std::abs(c2)));
    CHECK(max_diff(proj_combined(y, dv, c1, c2), y) <= 1e-12);
    const auto [s, shift] = combined_affine(u, dv, c1, c2);
    CHECK(s > 0.0);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(s * u[i] + shift - y[i]) <= 1e-12);
  }
}

TEST_CASE("soft constraint penalty") {
  const std::vector<double> c{1.0, 2.0, 3.0, 4.0, 5.0};
  CHECK(soft_constraint_loss(c, c, 3.0) == 0.0);
  std::vector<double> off = c;
  for (double& v : off) v += 2.0;
  CHECK(soft_constraint_loss(off, c, 0.0) == 0.0);
  CHECK(soft_constraint_loss(off, c, 0.5) == 2.0);
}

namespace {

// |c1_hat - c1| on an independent cloud after the misuse projection of u(x) = x on [0, 2].
double misuse_deviation(std::size_t n, SeededRng& rng, double* scale_out) {
  const double volume = 2.0;
  const double c1 = 2.0;
  const double c2 = 8.0 / 3.0;
  std::vector<double> fit(n);
  for (double& v : fit) v = 2.0 * rng.uniform();
  const auto y = mc_misuse_projection(fit, volume, c1, c2);
  const auto [lo, hi] = std::minmax_element(fit.begin(), fit.end());
  const double s = (y[static_cast<std::size_t>(hi - fit.begin())] - y[static_cast<std::size_t>(lo - fit.begin())]) /
                   (*hi - *lo);
  const double shift = y[0] - s * fit[0];
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += s * (2.0 * rng.uniform()) + shift;
  if (scale_out != nullptr) *scale_out = s;
  CHECK(std::abs(volume / static_cast<double>(n) * std::accumulate(y.begin(), y.end(), 0.0) - c1) <= 1e-12);
  return std::abs(volume * sum / static_cast<double>(n) - c1);
}

}  // namespace

TEST_CASE("misuse projection drifts at the Monte Carlo rate on independent clouds") {
  constexpr int kTrials = 2000;
  constexpr std::size_t kN = 100;
  const double sigma_u = std::sqrt(1.0 / 3.0);
  SeededRng rng(3);
  double total = 0.0;
  double scale = 0.0;
  for (int k = 0; k < kTrials; ++k) {
    double s = 0.0;
    total += misuse_deviation(kN, rng, &s);
    scale += s;
  }
  const double mean_dev = total / kTrials;
  const double order = (scale / kTrials) * sigma_u * 2.0 / std::sqrt(static_cast<double>(kN));
  CHECK(mean_dev / order >= 0.5);
  CHECK(mean_dev / order <= 1.5);

  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t n : {100u, 1000u, 10000u, 100000u, 1000000u}) {
    double sq = 0.0;
    const int trials = 60;
    for (int k = 0; k < trials; ++k) {
      const double d = misuse_deviation(n, rng, nullptr);
      sq += d * d;
    }
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(0.5 * std::log(sq / trials));
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / 5.0;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / 5.0;
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  const double slope = num / den;
  CHECK(slope >= -0.6);
  CHECK(slope <= -0.4);
}
