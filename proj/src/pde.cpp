#include "cpl/pde.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "cpl/errors.hpp"

namespace cpl {

namespace {

constexpr std::array<double, 4> kFactorial{1.0, 1.0, 2.0, 6.0};

// Integrals of exp(-(x - 1)^2 / w^2) and its square over [0, 2].
double gaussian_mass(double w) { return w * std::sqrt(M_PI) * std::erf(1.0 / w); }
double gaussian_energy(double w) {
  return w / std::sqrt(2.0) * std::sqrt(M_PI) * std::erf(std::sqrt(2.0) / w);
}

std::function<double(std::span<const double>)> product_gaussian(std::size_t d, double width) {
  return [d, width](std::span<const double> x) {
    double e = 0.0;
    for (std::size_t k = 0; k < d; ++k) e += (x[k] - 1.0) * (x[k] - 1.0);
    return std::exp(-e / (width * width));
  };
}

void set_gaussian_initials(PDEProblem& p, double width) {
  p.c1.initial = std::pow(gaussian_mass(width), static_cast<double>(p.dim));
  p.c2.initial = std::pow(gaussian_energy(width), static_cast<double>(p.dim));
}

Domain unit_box(std::size_t d, double t_end) {
  return Domain(std::vector<double>(d, 0.0), std::vector<double>(d, 2.0), t_end);
}

PDEProblem base(const std::string& name, std::size_t d, double t_end, double width) {
  PDEProblem p;
  p.name = name;
  p.dim = d;
  p.domain = unit_box(d, t_end);
  p.initial_condition = product_gaussian(d, width);
  set_gaussian_initials(p, width);
  return p;
}

LinearTerm time_term(std::size_t d, int order, double coef = 1.0) {
  return LinearTerm{{DerivativePart{coef, d, order}}, 0.0, order == 1 ? "u_t" : "u_tt"};
}

PDEProblem advection1d() {
  // Horizon keeps the pulse clear of the outflow face, so zero flux holds.
  PDEProblem p = base("advection1d", 1, 0.4, 0.25);
  const double c = 1.0;
  p.constants = {{"c", c}};
  p.terms = {time_term(1, 1), LinearTerm{{DerivativePart{c, 0, 1}}, 0.0, "c*u_x"}};
  p.c1.kind = TargetSource::Kind::kConstant;
  p.c2.kind = TargetSource::Kind::kTable;
  return p;
}

PDEProblem advection2d() {
  PDEProblem p = base("advection2d", 2, 0.4, 1.0);
  const double c = 1.0;
  p.constants = {{"c", c}};
  p.terms = {time_term(2, 1), LinearTerm{{DerivativePart{c, 0, 1}}, 0.0, "c*u_x"},
             LinearTerm{{DerivativePart{c, 1, 1}}, 0.0, "c*u_y"}};
  // The wide pulse touches the faces from t = 0, so both invariants drift.
  p.c1.kind = TargetSource::Kind::kTable;
  p.c2.kind = TargetSource::Kind::kTable;
  return p;
}

PDEProblem reaction_diffusion1d() {
  PDEProblem p = base("reaction_diffusion1d", 1, 1.0, 0.5);
  const double diff = 0.01;
  const double k = 0.5;
  p.constants = {{"D", diff}, {"k", k}};
  p.terms = {time_term(1, 1), LinearTerm{{DerivativePart{-diff, 0, 2}}, 0.0, "-D*u_xx"},
             LinearTerm{{}, -k, "-k*u"}};
  p.c1.kind = TargetSource::Kind::kExponential;
  p.c1.rate = k;
  p.c2.kind = TargetSource::Kind::kTable;
  return p;
}

PDEProblem wave1d() {
  PDEProblem p = base("wave1d", 1, 1.0, 1.0);
  const double c = 1.0;
  p.constants = {{"c", c}};
  p.terms = {time_term(1, 2), LinearTerm{{DerivativePart{-c * c, 0, 2}}, 0.0, "-c^2*u_xx"}};
  p.initial_velocity_zero = true;
  p.c1.kind = TargetSource::Kind::kConstant;
  p.c2.kind = TargetSource::Kind::kTable;
  return p;
}

PDEProblem kdv1d() {
  PDEProblem p = base("kdv1d", 1, 1.0, 1.0);
  const double a = 1.0;
  const double b = 0.0025;
  p.constants = {{"a", a}, {"b", b}};
  p.terms = {time_term(1, 1), LinearTerm{{DerivativePart{b, 0, 3}}, 0.0, "b*u_xxx"}};
  p.nonlinear = Nonlinearity::kConvective;
  p.nonlinear_coefficient = a;
  p.c1.kind = TargetSource::Kind::kConstant;
  p.c2.kind = TargetSource::Kind::kConstant;
  return p;
}

PDEProblem sine_gordon_nd(std::size_t d) {
  PDEProblem p = base("sine_gordon_nd", d, 1.0, 1.0);
  p.terms.push_back(time_term(d, 2));
  for (std::size_t i = 0; i < d; ++i) {
    p.terms.push_back(LinearTerm{{DerivativePart{-1.0, i, 2}}, 0.0, "-u_x" + std::to_string(i) + "x" + std::to_string(i)});
  }
  p.nonlinear = Nonlinearity::kSine;
  p.nonlinear_coefficient = 1.0;
  p.initial_velocity_zero = true;
  // No reference solver in d dimensions: targets stay at their initial values.
  p.c1.kind = TargetSource::Kind::kConstant;
  p.c2.kind = TargetSource::Kind::kConstant;
  return p;
}

PDEProblem fokker_planck_linear_nd(std::size_t d, bool symmetric) {
  PDEProblem p = base("fokker_planck_linear_nd", d, 1.0, 1.0);
  const double drift = 0.1;
  const double dd = static_cast<double>(d);
  p.constants = {{"F", drift}, {"D", 1.0}};
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = symmetric ? i : 0; j < d; ++j) {
      LinearTerm term;
      term.label = "L(" + std::to_string(i) + "," + std::to_string(j) + ")";
      const bool merged = symmetric && i != j;
      term.parts.push_back({(merged ? 2.0 : 1.0) / (dd * dd), d, 1});
      term.parts.push_back({drift / dd, i, 1});
      if (merged) term.parts.push_back({drift / dd, j, 1});
      if (i == j) term.parts.push_back({-0.5, i, 2});
      p.terms.push_back(std::move(term));
    }
  }
  p.c1.kind = TargetSource::Kind::kConstant;
  p.c2.kind = TargetSource::Kind::kConstant;
  return p;
}

}  // namespace

int LinearTerm::max_order() const {
  int m = 0;
  for (const auto& part : parts) m = std::max(m, part.order);
  return m;
}

std::pair<double, double> InvariantTable::at(double time) const {
  if (t.empty()) throw RangeError("invariant table: empty");
  if (time < t.front() || time > t.back()) {
    throw RangeError("invariant table: t=" + std::to_string(time) + " outside [" + std::to_string(t.front()) +
                     ", " + std::to_string(t.back()) + "]");
  }
  auto it = std::lower_bound(t.begin(), t.end(), time);
  const auto i = static_cast<std::size_t>(it - t.begin());
  if (*it == time) return {c1[i], c2[i]};
  const double w = (time - t[i - 1]) / (t[i] - t[i - 1]);
  return {c1[i - 1] + w * (c1[i] - c1[i - 1]), c2[i - 1] + w * (c2[i] - c2[i - 1])};
}

bool PDEProblem::needs_table() const {
  return c1.kind == TargetSource::Kind::kTable || c2.kind == TargetSource::Kind::kTable;
}

int PDEProblem::required_order(std::size_t coord) const {
  int m = 0;
  for (const auto& term : terms) {
    for (const auto& part : term.parts) {
      if (part.coord == coord) m = std::max(m, part.order);
    }
  }
  if (nonlinear == Nonlinearity::kConvective && coord == 0) m = std::max(m, 1);
  return m;
}

PDEProblem make_problem(const std::string& name, const ProblemOptions& options) {
  if (name == "advection1d") return advection1d();
  if (name == "advection2d") return advection2d();
  if (name == "reaction_diffusion1d") return reaction_diffusion1d();
  if (name == "wave1d") return wave1d();
  if (name == "kdv1d") return kdv1d();
  if (name == "sine_gordon_nd" || name == "fokker_planck_linear_nd") {
    if (options.dim < 1 || options.dim > 64) throw ConfigError(name + ": dimension must be in [1, 64]");
    return name == "sine_gordon_nd" ? sine_gordon_nd(options.dim)
                                    : fokker_planck_linear_nd(options.dim, options.symmetric_pairs);
  }
  throw ConfigError("unknown problem '" + name + "'");
}

std::vector<std::string> problem_names() {
  return {"advection1d", "advection2d", "reaction_diffusion1d", "wave1d",
          "kdv1d",       "sine_gordon_nd", "fokker_planck_linear_nd"};
}

std::pair<double, double> initial_invariants(const PDEProblem& problem) {
  return {problem.c1.initial, problem.c2.initial};
}

std::pair<double, double> invariant_targets(const PDEProblem& problem, double t) {
  const double t_end = problem.domain.t_end;
  if (!(t >= 0.0 && t <= t_end)) {
    throw RangeError(problem.name + ": target time " + std::to_string(t) + " outside [0, " +
                     std::to_string(t_end) + "]");
  }
  std::pair<double, double> tab{0.0, 0.0};
  if (problem.needs_table()) {
    if (!problem.table) throw ConfigError(problem.name + ": invariant targets need a reference table");
    tab = problem.table->at(t);
  }
  auto pick = [&](const TargetSource& src, double table_value) {
    switch (src.kind) {
      case TargetSource::Kind::kConstant:
        return src.initial;
      case TargetSource::Kind::kExponential:
        return src.initial * std::exp(src.rate * t);
      case TargetSource::Kind::kTable:
        return table_value;
    }
    return 0.0;
  };
  return {pick(problem.c1, tab.first), pick(problem.c2, tab.second)};
}

Var eval_linear_term(Tape& tape, const LinearTerm& term, const FieldEvaluator& field,
                     std::span<const double> x, double t, std::size_t dim) {
  // One jet per distinct coordinate, at the highest order the term needs.
  std::array<std::size_t, 8> coords{};
  std::array<int, 8> orders{};
  std::size_t n_coords = 0;
  for (const auto& part : term.parts) {
    if (part.coord > dim) throw InputError("linear term: coordinate out of range");
    std::size_t slot = 0;
    while (slot < n_coords && coords[slot] != part.coord) ++slot;
    if (slot == n_coords) {
      if (n_coords == coords.size()) throw UnimplementedError("linear term: too many coordinates");
      coords[n_coords] = part.coord;
      orders[n_coords++] = part.order;
    } else {
      orders[slot] = std::max(orders[slot], part.order);
    }
  }
  std::array<Jet, 8> jets{};
  for (std::size_t s = 0; s < n_coords; ++s) {
    jets[s] = field(tape, x, t, coords[s], orders[s]);
    if (jets[s].order < orders[s]) throw InputError("linear term: evaluator returned too low an order");
  }

  std::vector<double> w;
  std::vector<Var> v;
  for (const auto& part : term.parts) {
    std::size_t slot = 0;
    while (coords[slot] != part.coord) ++slot;
    w.push_back(part.coefficient * kFactorial[part.order]);
    v.push_back(jets[slot][part.order]);
  }
  if (term.identity != 0.0) {
    Var value = n_coords > 0 ? jets[0][0] : field(tape, x, t, 0, 0)[0];
    w.push_back(term.identity);
    v.push_back(value);
  }
  return tape.lincomb(0.0, w, v);
}

Var eval_nonlinear(Tape& tape, const PDEProblem& problem, const FieldEvaluator& field,
                   std::span<const double> x, double t) {
  switch (problem.nonlinear) {
    case Nonlinearity::kNone:
      return Var{0.0};
    case Nonlinearity::kConvective: {
      const Jet u = field(tape, x, t, 0, 1);
      const double a = problem.nonlinear_coefficient;
      return tape.dot(Var{0.0}, std::span(&a, 1), std::span(&u.c[0], 1), std::span(&u.c[1], 1));
    }
    case Nonlinearity::kSine: {
      const Jet u = field(tape, x, t, 0, 0);
      return tape.mul(Var{problem.nonlinear_coefficient}, tape.sin(u[0]));
    }
  }
  return Var{0.0};
}

double eval_forcing(const PDEProblem& problem, std::span<const double> x, double t) {
  return problem.forcing ? problem.forcing(x, t) : 0.0;
}

Var residual_sampled(Tape& tape, const PDEProblem& problem, const FieldEvaluator& field,
                     std::span<const double> x, double t, std::span<const std::size_t> subset) {
  if (subset.empty()) throw InputError("residual_sampled: empty index set");
  const double scale = static_cast<double>(problem.n_terms()) / static_cast<double>(subset.size());
  std::vector<double> w;
  std::vector<Var> v;
  for (std::size_t k : subset) {
    if (k >= problem.n_terms()) throw InputError("residual_sampled: index out of range");
    w.push_back(scale);
    v.push_back(eval_linear_term(tape, problem.terms[k], field, x, t, problem.dim));
  }
  w.push_back(1.0);
  v.push_back(eval_nonlinear(tape, problem, field, x, t));
  return tape.lincomb(-eval_forcing(problem, x, t), w, v);
}

Var residual_full(Tape& tape, const PDEProblem& problem, const FieldEvaluator& field,
                  std::span<const double> x, double t) {
  std::vector<std::size_t> all(problem.n_terms());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  return residual_sampled(tape, problem, field, x, t, all);
}

std::vector<BoundaryPoint> sample_boundary(const Domain& domain, std::span<const double> times,
                                           SeededRng& rng) {
  std::vector<BoundaryPoint> out;
  out.reserve(times.size());
  const std::size_t d = domain.dim();
  for (double t : times) {
    BoundaryPoint b;
    b.t = t;
    b.axis = static_cast<std::size_t>(rng.below(d));
    const bool upper = rng.below(2) == 1;
    b.normal_sign = upper ? 1.0 : -1.0;
    b.x.resize(d);
    for (std::size_t k = 0; k < d; ++k) b.x[k] = domain.lower[k] + rng.uniform() * domain.extent(k);
    b.x[b.axis] = upper ? domain.upper[b.axis] : domain.lower[b.axis];
    out.push_back(std::move(b));
  }
  return out;
}

Var ic_bc_loss(Tape& tape, const PDEProblem& problem, const FieldEvaluator& field,
               const PointCloud& ic_points, std::span<const BoundaryPoint> bc_points) {
  std::vector<Var> parts;
  std::vector<double> weights;
  const std::size_t n_ic = ic_points.size();
  for (std::size_t i = 0; i < n_ic; ++i) {
    auto x = ic_points.point(i);
    Var u;
    if (problem.initial_velocity_zero) {
      const Jet jt = field(tape, x, 0.0, problem.dim, 1);
      u = jt[0];
      parts.push_back(tape.pow2(jt[1]));
      weights.push_back(problem.ic_weight / static_cast<double>(n_ic));
    } else {
      u = field(tape, x, 0.0, 0, 0)[0];
    }
    parts.push_back(tape.pow2(tape.sub(u, Var{problem.initial_condition(x)})));
    weights.push_back(problem.ic_weight / static_cast<double>(n_ic));
  }
  if (problem.boundary == BoundaryKind::kNeumann) {
    for (const auto& b : bc_points) {
      const Jet j = field(tape, b.x, b.t, b.axis, 1);
      parts.push_back(tape.pow2(j[1]));  // sign of the normal drops out when squared
      weights.push_back(problem.bc_weight / static_cast<double>(bc_points.size()));
    }
  }
  return tape.lincomb(0.0, weights, parts);
}

}  // namespace cpl
