#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpl/jet.hpp"
#include "cpl/sampler.hpp"
#include "cpl/tape.hpp"

namespace cpl {

/// coefficient * d^order u / d(coord)^order. `coord` indexes spatial axes
/// 0..d-1; coord == d is time.
struct DerivativePart {
  double coefficient = 0.0;
  std::size_t coord = 0;
  int order = 1;
};

/// One additive component L_k of the linear operator: a sum of derivative
/// parts plus an optional zeroth-order (identity) coefficient. L_k[1] equals
/// `identity`.
struct LinearTerm {
  std::vector<DerivativePart> parts;
  double identity = 0.0;
  std::string label;

  [[nodiscard]] double on_constant_one() const { return identity; }
  [[nodiscard]] int max_order() const;
};

enum class Nonlinearity { kNone, kConvective, kSine };
enum class BoundaryKind { kNeumann, kPeriodic };

/// Trapezoid-rule invariant trajectories sampled at increasing stamps.
struct InvariantTable {
  std::vector<double> t;
  std::vector<double> c1;
  std::vector<double> c2;

  /// Linear interpolation; exact on stamps. RangeError outside [t.front(), t.back()].
  [[nodiscard]] std::pair<double, double> at(double time) const;
};

/// How one invariant trajectory c(t) is produced.
struct TargetSource {
  enum class Kind { kConstant, kExponential, kTable };
  Kind kind = Kind::kConstant;
  double initial = 0.0;  // c(0), analytic
  double rate = 0.0;     // kExponential: c(t) = initial * exp(rate * t)
};

struct PDEProblem {
  std::string name;
  std::size_t dim = 1;
  Domain domain;
  std::vector<LinearTerm> terms;
  Nonlinearity nonlinear = Nonlinearity::kNone;
  double nonlinear_coefficient = 0.0;
  /// Right-hand side R(x, t); empty means zero.
  std::function<double(std::span<const double>, double)> forcing;
  std::function<double(std::span<const double>)> initial_condition;
  /// Second order in time: the IC loss also pins u_t(x, 0) = 0.
  bool initial_velocity_zero = false;
  BoundaryKind boundary = BoundaryKind::kNeumann;
  double ic_weight = 10.0;
  double bc_weight = 1.0;
  TargetSource c1;
  TargetSource c2;
  std::shared_ptr<const InvariantTable> table;
  /// Named physical constants (speeds, diffusivities) for reports.
  std::map<std::string, double> constants;

  [[nodiscard]] std::size_t n_terms() const { return terms.size(); }
  [[nodiscard]] bool needs_table() const;
  /// Highest derivative order along `coord` needed by any term or the
  /// nonlinear part.
  [[nodiscard]] int required_order(std::size_t coord) const;
};

struct ProblemOptions {
  std::size_t dim = 2;          // for the *_nd problems
  bool symmetric_pairs = false;  // fokker_planck_linear_nd: merge (i,j),(j,i)
};

/// Registry of named problems. Throws ConfigError for unknown names.
PDEProblem make_problem(const std::string& name, const ProblemOptions& options = {});
std::vector<std::string> problem_names();

/// Returns (c1(t), c2(t)). RangeError outside [0, T]; ConfigError when a
/// table-backed invariant has no table attached.
std::pair<double, double> invariant_targets(const PDEProblem& problem, double t);

/// Evaluates a jet of the field along `coord` to `order` at (x, t).
using FieldEvaluator =
    std::function<Jet(Tape&, std::span<const double> x, double t, std::size_t coord, int order)>;

/// L_k[field] at (x, t), tape-recorded.
Var eval_linear_term(Tape& tape, const LinearTerm& term, const FieldEvaluator& field,
                     std::span<const double> x, double t, std::size_t dim);

/// Nonlinear remainder N[field] at (x, t).
Var eval_nonlinear(Tape& tape, const PDEProblem& problem, const FieldEvaluator& field,
                   std::span<const double> x, double t);

double eval_forcing(const PDEProblem& problem, std::span<const double> x, double t);

/// sum_k L_k[field] + N[field] - R.
Var residual_full(Tape& tape, const PDEProblem& problem, const FieldEvaluator& field,
                  std::span<const double> x, double t);

/// (N_L / |S|) sum_{k in S} L_k[field] + N[field] - R. Indices are zero-based.
Var residual_sampled(Tape& tape, const PDEProblem& problem, const FieldEvaluator& field,
                     std::span<const double> x, double t, std::span<const std::size_t> subset);

/// A boundary collocation point with outward normal along `axis`.
struct BoundaryPoint {
  std::vector<double> x;
  double t = 0.0;
  std::size_t axis = 0;
  double normal_sign = 1.0;
};

/// Boundary points on random faces with the given times.
std::vector<BoundaryPoint> sample_boundary(const Domain& domain, std::span<const double> times,
                                           SeededRng& rng);

/// w_ic * mean (u(x,0) - u0(x))^2 [+ w_ic * mean u_t(x,0)^2]
/// + w_bc * mean (d_n u)^2 over the boundary batch.
Var ic_bc_loss(Tape& tape, const PDEProblem& problem, const FieldEvaluator& field,
               const PointCloud& ic_points, std::span<const BoundaryPoint> bc_points);

/// Integrals of the initial condition over the domain (analytic).
std::pair<double, double> initial_invariants(const PDEProblem& problem);

}  // namespace cpl
