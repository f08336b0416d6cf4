#pragma once

#include <span>
#include <vector>

#include "cpl/jet.hpp"
#include "cpl/mlp.hpp"
#include "cpl/pde.hpp"
#include "cpl/sampler.hpp"
#include "cpl/tape.hpp"

namespace cpl {

inline constexpr double kVarianceFloor = 1e-8;

/// Domain-averaged targets at one time: c1 / |X| and c2 / |X|.
struct TargetInvariants {
  double c1_bar = 0.0;
  double c2_bar = 0.0;

  [[nodiscard]] double v_target() const { return c2_bar - c1_bar * c1_bar; }
};

/// Averaged targets of `problem` at time t.
TargetInvariants targets_at(const PDEProblem& problem, double t);

struct MomentEstimate {
  double mu1 = 0.0;
  double mu2 = 0.0;
  std::size_t m = 0;
  double t = 0.0;

  [[nodiscard]] double variance() const { return mu2 - mu1 * mu1; }
};

struct AffineParams {
  double alpha = 1.0;
  double beta = 0.0;
  double t = 0.0;
};

struct ProjectionJacobians {
  double dalpha_dmu1 = 0.0;
  double dalpha_dmu2 = 0.0;
  double dbeta_dmu1 = 0.0;
  double dbeta_dmu2 = 0.0;
};

/// Moments of plain values (pairwise-free, fixed left-to-right order).
MomentEstimate moments_of(std::span<const double> values, double t);

/// Detached moments of u_raw over a cloud in domain coordinates. Touches no
/// tape. Throws InputError for fewer than two points.
MomentEstimate estimate_moments(const MLPParams& params, const PointCloud& cloud, double t);

/// alpha = sqrt(V_target / max(sigma^2, eps)), beta = c1_bar - alpha * mu1.
/// NumericalError("ill-posed targets") when V_target <= 0; InputError for
/// non-finite moments.
AffineParams solve_affine(const MomentEstimate& moments, const TargetInvariants& targets,
                          double eps = kVarianceFloor);

/// Implicit Jacobians of (alpha, beta) with respect to (mu1, mu2), using the
/// same variance floor as solve_affine.
ProjectionJacobians projection_jacobians(const MomentEstimate& moments, const AffineParams& affine,
                                         double eps = kVarianceFloor);

/// (alpha mu1 + beta - c1_bar, alpha^2 mu2 + 2 alpha beta mu1 + beta^2 - c2_bar).
std::pair<double, double> constraint_residuals(const MomentEstimate& moments, const AffineParams& affine,
                                               const TargetInvariants& targets);

struct MomentGrads {
  std::vector<double> mu1;  // (1/N) sum grad u
  std::vector<double> mu2;  // (2/N) sum u grad u
};

/// Tape-recorded mini-batch estimates of the moment gradients.
MomentGrads moment_grad_estimates(const MLPParams& params, const PointCloud& batch, double t);

/// grad alpha * u + alpha grad u + grad beta, with grad alpha and grad beta
/// assembled from the Jacobians and the moment-gradient estimates.
std::vector<double> projected_grad(const AffineParams& affine, const ProjectionJacobians& jac,
                                   const MomentGrads& moment_grads, double u_raw,
                                   std::span<const double> grad_u_raw);

double apply_projection(double u_raw, const AffineParams& affine);
/// Order 0 gets alpha * c0 + beta; higher orders scale by alpha.
Jet apply_projection(Tape& tape, const Jet& u_raw, Var alpha, Var beta);
Jet apply_projection(Tape& tape, const Jet& u_raw, const AffineParams& affine);

struct ShiftResult {
  double delta = 0.0;
  std::vector<double> shifted;
};

/// Shift computed from and applied to the same batch.
ShiftResult same_batch_shift(std::span<const double> batch, double c1_bar);

/// Residual c1_bar - mean(batch + delta) for a shift taken from another set.
double shift_residual(std::span<const double> batch, double delta, double c1_bar);

}  // namespace cpl
