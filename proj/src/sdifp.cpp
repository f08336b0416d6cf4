#include "cpl/sdifp.hpp"

#include <algorithm>
#include <cmath>

#include "cpl/errors.hpp"

namespace cpl {

TargetInvariants targets_at(const PDEProblem& problem, double t) {
  const auto [c1, c2] = invariant_targets(problem, t);
  const double vol = problem.domain.volume();
  return {c1 / vol, c2 / vol};
}

MomentEstimate moments_of(std::span<const double> values, double t) {
  if (values.size() < 2) throw InputError("moments: need at least two points");
  double s1 = 0.0;
  double s2 = 0.0;
  for (double u : values) {
    s1 += u;
    s2 += u * u;
  }
  const double m = static_cast<double>(values.size());
  return {s1 / m, s2 / m, values.size(), t};
}

MomentEstimate estimate_moments(const MLPParams& params, const PointCloud& cloud, double t) {
  if (cloud.size() < 2) throw InputError("estimate_moments: need at least two points");
  const auto u = forward_batch(params, cloud, t);
  return moments_of(u, t);
}

AffineParams solve_affine(const MomentEstimate& moments, const TargetInvariants& targets, double eps) {
  if (!std::isfinite(moments.mu1) || !std::isfinite(moments.mu2)) {
    throw InputError("solve_affine: non-finite moments");
  }
  const double v = targets.v_target();
  if (!(v > 0.0)) {
    throw NumericalError("solve_affine: ill-posed targets (V_target = " + std::to_string(v) + " at t = " +
                         std::to_string(moments.t) + ")");
  }
  const double var = std::max(moments.variance(), eps);
  const double alpha = std::sqrt(v / var);
  return {alpha, targets.c1_bar - alpha * moments.mu1, moments.t};
}

ProjectionJacobians projection_jacobians(const MomentEstimate& moments, const AffineParams& affine,
                                         double eps) {
  const double var = std::max(moments.variance(), eps);
  ProjectionJacobians j;
  j.dalpha_dmu1 = affine.alpha * moments.mu1 / var;
  j.dalpha_dmu2 = -affine.alpha / (2.0 * var);
  j.dbeta_dmu1 = -affine.alpha - moments.mu1 * j.dalpha_dmu1;
  j.dbeta_dmu2 = -moments.mu1 * j.dalpha_dmu2;
  return j;
}

std::pair<double, double> constraint_residuals(const MomentEstimate& moments, const AffineParams& affine,
                                               const TargetInvariants& targets) {
  const double a = affine.alpha;
  const double b = affine.beta;
  return {a * moments.mu1 + b - targets.c1_bar,
          a * a * moments.mu2 + 2.0 * a * b * moments.mu1 + b * b - targets.c2_bar};
}

MomentGrads moment_grad_estimates(const MLPParams& params, const PointCloud& batch, double t) {
  if (batch.empty()) throw InputError("moment_grad_estimates: empty batch");
  const std::size_t n = batch.size();
  Tape tape;
  const ParamVars theta = bind_params(tape, params);
  std::vector<std::pair<Var, double>> seeds1;
  std::vector<std::pair<Var, double>> seeds2;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Var u = forward(tape, params, theta, batch.point(i), t);
    seeds1.emplace_back(u, inv_n);
    seeds2.emplace_back(u, 2.0 * inv_n * u.value);
  }
  MomentGrads out;
  out.mu1 = gather_adjoints(tape.backward(seeds1), theta);
  out.mu2 = gather_adjoints(tape.backward(seeds2), theta);
  return out;
}

std::vector<double> projected_grad(const AffineParams& affine, const ProjectionJacobians& jac,
                                   const MomentGrads& moment_grads, double u_raw,
                                   std::span<const double> grad_u_raw) {
  const std::size_t p = grad_u_raw.size();
  if (moment_grads.mu1.size() != p || moment_grads.mu2.size() != p) {
    throw InputError("projected_grad: gradient length mismatch");
  }
  std::vector<double> g(p);
  for (std::size_t k = 0; k < p; ++k) {
    const double ga = jac.dalpha_dmu1 * moment_grads.mu1[k] + jac.dalpha_dmu2 * moment_grads.mu2[k];
    const double gb = jac.dbeta_dmu1 * moment_grads.mu1[k] + jac.dbeta_dmu2 * moment_grads.mu2[k];
    g[k] = affine.alpha * grad_u_raw[k] + u_raw * ga + gb;
  }
  return g;
}

double apply_projection(double u_raw, const AffineParams& affine) {
  return affine.alpha * u_raw + affine.beta;
}

Jet apply_projection(Tape& tape, const Jet& u_raw, Var alpha, Var beta) {
  Jet out;
  out.order = u_raw.order;
  const double one = 1.0;
  out[0] = tape.dot(beta, std::span(&one, 1), std::span(&alpha, 1), std::span(&u_raw.c[0], 1));
  for (int k = 1; k <= u_raw.top(); ++k) out[k] = tape.mul(alpha, u_raw[k]);
  return out;
}

Jet apply_projection(Tape& tape, const Jet& u_raw, const AffineParams& affine) {
  return apply_projection(tape, u_raw, Var{affine.alpha}, Var{affine.beta});
}

ShiftResult same_batch_shift(std::span<const double> batch, double c1_bar) {
  if (batch.empty()) throw InputError("same_batch_shift: empty batch");
  double s = 0.0;
  for (double u : batch) s += u;
  ShiftResult r;
  r.delta = c1_bar - s / static_cast<double>(batch.size());
  r.shifted.reserve(batch.size());
  for (double u : batch) r.shifted.push_back(u + r.delta);
  return r;
}

double shift_residual(std::span<const double> batch, double delta, double c1_bar) {
  if (batch.empty()) throw InputError("shift_residual: empty batch");
  double s = 0.0;
  for (double u : batch) s += u + delta;
  return c1_bar - s / static_cast<double>(batch.size());
}

}  // namespace cpl
