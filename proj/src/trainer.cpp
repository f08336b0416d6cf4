#include "cpl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "cpl/baselines.hpp"
#include "cpl/errors.hpp"

namespace cpl {

namespace {

constexpr std::uint64_t kSampleStream = 0x73616D70;
constexpr std::uint64_t kInferenceStream = 0x696E6665;

PointCloud empty_cloud(std::size_t dim) {
  PointCloud c;
  c.dim = dim;
  return c;
}

PointCloud random_domain_points(std::size_t m, const Domain& domain, SeededRng& rng) {
  return map_to_domain(uniform_points(m, domain.dim(), rng), domain);
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = k;
  return v;
}

bool identity_projection(Method m) { return m == Method::kVanilla || m == Method::kSoft; }

// Per-slice (alpha, beta) as tape values for the chosen method.
struct SliceProjection {
  Var alpha{1.0};
  Var beta{0.0};
  AffineParams affine;
  MomentEstimate moments;
};

SliceProjection sdifp_projection(Tape& tape, const MLPParams& params, const PDEProblem& problem,
                                 const PointCloud& moment_cloud, double t, std::span<const Var> u) {
  SliceProjection sp;
  sp.moments = estimate_moments(params, moment_cloud, t);
  sp.affine = solve_affine(sp.moments, targets_at(problem, t));
  const ProjectionJacobians jac = projection_jacobians(sp.moments, sp.affine);
  // grad alpha = (da/dmu1) mean grad u + (da/dmu2) (2/N) sum u grad u, likewise beta.
  const double inv_n = 1.0 / static_cast<double>(u.size());
  std::vector<double> wa(u.size());
  std::vector<double> wb(u.size());
  for (std::size_t p = 0; p < u.size(); ++p) {
    wa[p] = (jac.dalpha_dmu1 + 2.0 * jac.dalpha_dmu2 * u[p].value) * inv_n;
    wb[p] = (jac.dbeta_dmu1 + 2.0 * jac.dbeta_dmu2 * u[p].value) * inv_n;
  }
  sp.alpha = tape.linearized(sp.affine.alpha, u, wa);
  sp.beta = tape.linearized(sp.affine.beta, u, wb);
  return sp;
}

SliceProjection discrete_projection(Tape& tape, const PDEProblem& problem, std::span<const Var> field, double dv,
                                    double t, bool through) {
  SliceProjection sp;
  const auto [c1, c2] = invariant_targets(problem, t);
  std::vector<double> values(field.size());
  for (std::size_t p = 0; p < field.size(); ++p) values[p] = field[p].value;
  const auto [s, b] = combined_affine(values, dv, c1, c2);
  sp.affine = {s, b, t};
  sp.moments = moments_of(values, t);
  if (!through) {
    sp.alpha = Var{s};
    sp.beta = Var{b};
    return sp;
  }
  const double n = static_cast<double>(field.size());
  const double m = c1 / (n * dv);
  const double spread = c2 / dv - n * m * m;
  const std::vector<double> w(field.size(), 1.0 / n);
  const Var mean = tape.lincomb(0.0, w, field);
  std::vector<Var> centred(field.size());
  for (std::size_t p = 0; p < field.size(); ++p) centred[p] = tape.sub(field[p], mean);
  const Var ss = tape.dot(Var{0.0}, centred, centred);
  sp.alpha = tape.sqrt(tape.div(Var{spread}, ss));
  sp.beta = tape.sub(Var{m}, tape.mul(sp.alpha, mean));
  return sp;
}

}  // namespace

Method parse_method(const std::string& s) {
  if (s == "vanilla") return Method::kVanilla;
  if (s == "soft") return Method::kSoft;
  if (s == "discrete_proj") return Method::kDiscreteProj;
  if (s == "sdifp") return Method::kSdifp;
  throw ConfigError("unknown method '" + s + "' (vanilla, soft, discrete_proj, sdifp)");
}

Estimator parse_estimator(const std::string& s) {
  if (s == "full") return Estimator::kFull;
  if (s == "ds_uge") return Estimator::kDsUge;
  if (s == "soo") return Estimator::kSoo;
  throw ConfigError("unknown estimator '" + s + "' (full, ds_uge, soo)");
}

ProjectionMode parse_projection_mode(const std::string& s) {
  if (s == "cloud") return ProjectionMode::kCloud;
  if (s == "grid") return ProjectionMode::kGrid;
  throw ConfigError("unknown projection mode '" + s + "' (cloud, grid)");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kVanilla: return "vanilla";
    case Method::kSoft: return "soft";
    case Method::kDiscreteProj: return "discrete_proj";
    case Method::kSdifp: return "sdifp";
  }
  return "?";
}

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::kFull: return "full";
    case Estimator::kDsUge: return "ds_uge";
    case Estimator::kSoo: return "soo";
  }
  return "?";
}

std::string to_string(ProjectionMode m) { return m == ProjectionMode::kGrid ? "grid" : "cloud"; }

void TrainConfig::validate(const PDEProblem& problem) const {
  const std::size_t n_l = problem.n_terms();
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (time_slices < 1) throw ConfigError("time_slices must be >= 1");
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (ic_points < 2) throw ConfigError("ic_points must be >= 2");
  if (size_i(n_l) > n_l || size_j(n_l) > n_l) {
    throw ConfigError("subset sizes must not exceed the " + std::to_string(n_l) + " linear terms of " + problem.name);
  }
  if (method == Method::kSdifp && cloud < 2) throw ConfigError("cloud must be >= 2");
  if (method == Method::kDiscreteProj && projection == ProjectionMode::kCloud && batch < 2 * time_slices) {
    throw ConfigError("discrete_proj in cloud mode needs at least two collocation points per time slice");
  }
  if (method == Method::kDiscreteProj && projection == ProjectionMode::kGrid) {
    double n = 1.0;
    for (std::size_t k = 0; k < problem.dim; ++k) n *= static_cast<double>(grid_per_dim);
    const auto total = n > 1e18 ? std::numeric_limits<std::size_t>::max() : static_cast<std::size_t>(n);
    preflight_grid(total, layers * width * 2);
  }
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (eval_times < 2) throw ConfigError("eval_times must be >= 2");
  if (holdout < 2) throw ConfigError("holdout must be >= 2");
  if (width < 1 || layers < 1) throw ConfigError("width and layers must be >= 1");
}

NetworkConfig network_config(const TrainConfig& config, const PDEProblem& problem) {
  NetworkConfig nc;
  nc.spatial_dim = problem.dim;
  nc.hidden_layers = config.layers;
  nc.width = config.width;
  nc.seed = config.seed;
  if (config.input_scaling) set_unit_input_scaling(nc, problem.domain);
  return nc;
}

StepSample draw_sample(const PDEProblem& problem, const TrainConfig& config, std::size_t step, SeededRng& rng) {
  SeededRng r = rng.split(step);
  const Domain& dom = problem.domain;
  const std::size_t d = problem.dim;
  const std::size_t n_slices = std::min(config.time_slices, config.batch);
  StepSample s;

  Slice initial;
  initial.t = 0.0;
  initial.initial = true;
  initial.batch = random_domain_points(config.ic_points, dom, r);
  s.slices.push_back(std::move(initial));

  std::vector<double> times(n_slices);
  for (double& t : times) t = dom.t_end * (1.0 - r.uniform());  // (0, T]
  const PointCloud colloc = random_domain_points(config.batch, dom, r);
  for (std::size_t k = 0; k < n_slices; ++k) {
    Slice sl;
    sl.t = times[k];
    sl.batch = empty_cloud(d);
    for (std::size_t p = k; p < config.batch; p += n_slices) {
      auto x = colloc.point(p);
      sl.batch.coords.insert(sl.batch.coords.end(), x.begin(), x.end());
    }
    const std::vector<double> bt(config.bc_points, sl.t);
    sl.boundary = sample_boundary(dom, bt, r);
    s.slices.push_back(std::move(sl));
  }

  if (config.method == Method::kSdifp) {
    const std::uint64_t skip = config.frozen_cloud ? 0 : static_cast<std::uint64_t>(step) * config.cloud;
    s.moment_cloud = map_to_domain(quasi_random_points(config.cloud, d, skip, config.seed), dom);
  }
  if (config.method == Method::kDiscreteProj && config.projection == ProjectionMode::kGrid) {
    const std::vector<std::size_t> per(d, config.grid_per_dim);
    s.grid = grid_points(dom, per);
  }
  const std::size_t n_l = problem.n_terms();
  s.sets = sample_subsets(n_l, config.size_i(n_l), config.size_j(n_l), r);
  return s;
}

StepResult compute_step(const MLPParams& params, const PDEProblem& problem, const TrainConfig& config,
                        const StepSample& sample, Tape* workspace) {
  Tape local;
  Tape& tape = workspace != nullptr ? *workspace : local;
  tape.clear();
  const ParamVars theta = bind_params(tape, params);
  StepResult out;
  const std::size_t n_l = problem.n_terms();
  const std::vector<std::size_t> full = all_indices(n_l);
  const std::vector<std::size_t>& set_i = config.estimator == Estimator::kFull ? full : sample.sets.I;
  const std::vector<std::size_t>& set_j = config.estimator == Estimator::kDsUge ? sample.sets.J : set_i;
  const double volume = problem.domain.volume();

  std::size_t n_res = 0;
  std::size_t n_bc_slices = 0;
  for (const auto& sl : sample.slices) {
    if (!sl.initial) n_res += sl.batch.size();
    if (!sl.initial && !sl.boundary.empty()) ++n_bc_slices;
  }
  if (n_res == 0) throw InputError("compute_step: no residual points");

  std::vector<Var> objective_terms;
  std::vector<double> objective_weights;
  double residual_loss = 0.0;
  double ic_bc = 0.0;
  std::vector<Var> penalty_terms;

  for (const auto& sl : sample.slices) {
    const std::size_t n_s = sl.batch.size();
    if (n_s == 0) continue;
    std::vector<Var> u(n_s);
    for (std::size_t p = 0; p < n_s; ++p) u[p] = forward(tape, params, theta, sl.batch.point(p), sl.t);

    SliceProjection sp;
    switch (config.method) {
      case Method::kSdifp:
        sp = sdifp_projection(tape, params, problem, sample.moment_cloud, sl.t, u);
        break;
      case Method::kDiscreteProj:
        if (config.projection == ProjectionMode::kGrid) {
          std::vector<Var> g(sample.grid.size());
          for (std::size_t p = 0; p < g.size(); ++p) g[p] = forward(tape, params, theta, sample.grid.point(p), sl.t);
          const double dv = volume / static_cast<double>(g.size());
          sp = discrete_projection(tape, problem, g, dv, sl.t, config.through_projection);
        } else {
          sp = discrete_projection(tape, problem, u, volume / static_cast<double>(n_s), sl.t,
                                   config.through_projection);
        }
        break;
      case Method::kVanilla:
      case Method::kSoft:
        sp.affine = {1.0, 0.0, sl.t};
        break;
    }
    out.affine.push_back(sp.affine);
    out.moments.push_back(sp.moments);

    const bool identity = identity_projection(config.method);
    const FieldEvaluator field = [&](Tape& tp, std::span<const double> x, double t, std::size_t coord, int order) {
      Jet j = forward_jet(tp, params, theta, x, t, coord, order);
      return identity ? j : apply_projection(tp, j, sp.alpha, sp.beta);
    };

    if (config.method == Method::kSoft) {
      // c_hat from the slice batch: |X| mean u and |X| mean u^2
      const auto [c1, c2] = invariant_targets(problem, sl.t);
      const std::vector<double> w(n_s, volume / static_cast<double>(n_s));
      const Var c1_hat = tape.lincomb(0.0, w, u);
      const Var c2_hat = tape.dot(Var{0.0}, w, u, u);
      penalty_terms.push_back(tape.pow2(tape.sub(Var{c1}, c1_hat)));
      penalty_terms.push_back(tape.pow2(tape.sub(Var{c2}, c2_hat)));
    }

    if (sl.initial) {
      const Var ic = ic_bc_loss(tape, problem, field, sl.batch, {});
      objective_terms.push_back(ic);
      objective_weights.push_back(1.0);
      ic_bc += ic.value;
      continue;
    }
    if (!sl.boundary.empty()) {
      const Var bc = ic_bc_loss(tape, problem, field, empty_cloud(problem.dim), sl.boundary);
      objective_terms.push_back(bc);
      objective_weights.push_back(1.0 / static_cast<double>(n_bc_slices));
      ic_bc += bc.value / static_cast<double>(n_bc_slices);
    }
    for (std::size_t p = 0; p < n_s; ++p) {
      auto x = sl.batch.point(p);
      const Var b = residual_sampled(tape, problem, field, x, sl.t, set_i);
      const Var f = config.estimator == Estimator::kDsUge ? residual_sampled(tape, problem, field, x, sl.t, set_j) : b;
      residual_loss += 0.5 * f.value * f.value / static_cast<double>(n_res);
      objective_terms.push_back(b);
      objective_weights.push_back(f.value / static_cast<double>(n_res));
    }
  }

  double penalty = 0.0;
  if (!penalty_terms.empty()) {
    // lambda (1/T) sum_t [(c1 - c1_hat)^2 + (c2 - c2_hat)^2]
    const double w = config.lambda / static_cast<double>(penalty_terms.size() / 2);
    for (const Var& v : penalty_terms) {
      objective_terms.push_back(v);
      objective_weights.push_back(w);
      penalty += w * v.value;
    }
  }

  const Var objective = tape.lincomb(0.0, objective_weights, objective_terms);
  out.tape_nodes = tape.node_count();
  out.grad = gather_adjoints(tape.backward(objective), theta);
  for (double g : out.grad) {
    if (!std::isfinite(g)) throw NumericalError("compute_step: non-finite gradient");
  }
  out.loss = residual_loss + ic_bc + penalty;
  return out;
}

StepResult step_sdifp(const MLPParams& params, const PDEProblem& problem, const TrainConfig& config,
                      std::size_t step, SeededRng& rng) {
  TrainConfig c = config;
  c.method = Method::kSdifp;
  if (c.estimator == Estimator::kSoo) c.estimator = Estimator::kDsUge;
  return compute_step(params, problem, c, draw_sample(problem, c, step, rng));
}

StepResult step_soo(const MLPParams& params, const PDEProblem& problem, const TrainConfig& config,
                    std::size_t step, SeededRng& rng) {
  TrainConfig c = config;
  c.method = Method::kSdifp;
  c.estimator = Estimator::kSoo;
  return compute_step(params, problem, c, draw_sample(problem, c, step, rng));
}

StepResult step_baseline(const MLPParams& params, const PDEProblem& problem, const TrainConfig& config,
                         std::size_t step, SeededRng& rng, Method method) {
  if (method == Method::kSdifp) throw ConfigError("step_baseline: sdifp is not a baseline");
  TrainConfig c = config;
  c.method = method;
  c.estimator = Estimator::kFull;
  c.validate(problem);
  return compute_step(params, problem, c, draw_sample(problem, c, step, rng));
}

double learning_rate(const TrainConfig& config, std::size_t epoch) {
  if (config.epochs == 0) return config.lr0;
  const double frac = static_cast<double>(epoch) / static_cast<double>(config.epochs);
  return config.lr0 * std::max(0.0, 1.0 - frac);
}

void adam_update(std::vector<double>& params, AdamState& state, std::span<const double> grad, double lr) {
  if (grad.size() != params.size()) throw InputError("adam_update: gradient length mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw InputError("adam_update: state shape mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    state.m[k] = kAdamBeta1 * state.m[k] + (1.0 - kAdamBeta1) * grad[k];
    state.v[k] = kAdamBeta2 * state.v[k] + (1.0 - kAdamBeta2) * grad[k] * grad[k];
    const double m_hat = state.m[k] / c1;
    const double v_hat = state.v[k] / c2;
    params[k] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
  }
}

std::vector<AffineParams> affine_table(const MLPParams& params, const PDEProblem& problem,
                                       const TrainConfig& config, std::span<const double> times) {
  std::vector<AffineParams> table;
  table.reserve(times.size());
  const Domain& dom = problem.domain;
  switch (config.method) {
    case Method::kSdifp: {
      const PointCloud cloud = map_to_domain(quasi_random_points(config.cloud, problem.dim, 0, config.seed), dom);
      for (double t : times) table.push_back(solve_affine(estimate_moments(params, cloud, t), targets_at(problem, t)));
      break;
    }
    case Method::kDiscreteProj: {
      SeededRng base = SeededRng(config.seed).split(kInferenceStream);
      PointCloud grid;
      if (config.projection == ProjectionMode::kGrid) {
        grid = grid_points(dom, std::vector<std::size_t>(problem.dim, config.grid_per_dim));
      }
      for (std::size_t k = 0; k < times.size(); ++k) {
        const double t = times[k];
        SeededRng r = base.split(k);
        const PointCloud cloud =
            config.projection == ProjectionMode::kGrid ? grid : random_domain_points(config.batch, dom, r);
        const auto u = forward_batch(params, cloud, t);
        const auto [c1, c2] = invariant_targets(problem, t);
        const auto [s, b] = combined_affine(u, dom.volume() / static_cast<double>(cloud.size()), c1, c2);
        table.push_back({s, b, t});
      }
      break;
    }
    case Method::kVanilla:
    case Method::kSoft:
      for (double t : times) table.push_back({1.0, 0.0, t});
      break;
  }
  return table;
}

EvalContext make_eval_context(const PDEProblem& problem, const TrainConfig& config,
                              const ReferenceSolution* reference) {
  EvalContext ctx;
  const double t_end = problem.domain.t_end;
  for (std::size_t k = 0; k < config.eval_times; ++k) {
    ctx.times.push_back(k + 1 == config.eval_times
                            ? t_end
                            : t_end * static_cast<double>(k) / static_cast<double>(config.eval_times - 1));
  }
  ctx.holdout = map_to_domain(
      quasi_random_points(config.holdout, problem.dim, config.holdout_skip, config.seed ^ 0x686F6C64), problem.domain);
  ctx.reference = reference;
  return ctx;
}

std::pair<std::vector<double>, std::vector<double>> projected_invariants(
    const MLPParams& params, const PDEProblem& problem, std::span<const AffineParams> table,
    const PointCloud& cloud) {
  std::vector<double> c1;
  std::vector<double> c2;
  const double volume = problem.domain.volume();
  for (const auto& a : table) {
    auto u = forward_batch(params, cloud, a.t);
    for (double& v : u) v = apply_projection(v, a);
    const MomentEstimate m = moments_of(u, a.t);
    c1.push_back(volume * m.mu1);
    c2.push_back(volume * m.mu2);
  }
  return {c1, c2};
}

MetricsRecord evaluate(const MLPParams& params, const PDEProblem& problem, const TrainConfig& config,
                       const EvalContext& context) {
  MetricsRecord rec;
  const auto table = affine_table(params, problem, config, context.times);
  const auto [c1_hat, c2_hat] = projected_invariants(params, problem, table, context.holdout);
  double e1 = 0.0;
  double e2 = 0.0;
  for (std::size_t k = 0; k < context.times.size(); ++k) {
    const auto [c1, c2] = invariant_targets(problem, context.times[k]);
    e1 += std::abs(c1_hat[k] - c1);
    e2 += std::abs(c2_hat[k] - c2);
  }
  rec.error_c1 = e1 / static_cast<double>(context.times.size());
  rec.error_c2 = e2 / static_cast<double>(context.times.size());

  if (context.reference != nullptr) {
    const ReferenceSolution& ref = *context.reference;
    const PointCloud grid = ref.grid_cloud();
    const auto ref_table = affine_table(params, problem, config, ref.times);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t s = 0; s < ref.times.size(); ++s) {
      const auto u = forward_batch(params, grid, ref.times[s]);
      for (std::size_t p = 0; p < u.size(); ++p) {
        const double diff = apply_projection(u[p], ref_table[s]) - ref.snapshots[s][p];
        num += diff * diff;
        den += ref.snapshots[s][p] * ref.snapshots[s][p];
      }
    }
    rec.error_u = std::sqrt(num / den);
  }
  return rec;
}

TrainResult train(const PDEProblem& problem, const TrainConfig& config, const ReferenceSolution* reference,
                  const std::function<void(const MetricsRecord&)>& on_record) {
  config.validate(problem);
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  TrainResult result;
  result.params = init_params(network_config(config, problem));
  AdamState adam;
  SeededRng rng = SeededRng(config.seed).split(kSampleStream);
  const EvalContext ctx = make_eval_context(problem, config, reference);
  std::size_t window_nodes = 0;
  Tape workspace;
  auto record = [&](std::size_t epoch, double loss) {
    MetricsRecord rec = evaluate(result.params, problem, config, ctx);
    rec.epoch = epoch;
    rec.loss = loss;
    rec.tape_nodes = window_nodes;
    // wall-clock time is opt-in so that metrics files stay reproducible
    if (config.timing) rec.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    result.history.push_back(rec);
    if (on_record) on_record(rec);
    window_nodes = 0;
  };
  if (config.epochs == 0) {
    // evaluation of the initial network only
    const StepResult step = compute_step(result.params, problem, config, draw_sample(problem, config, 0, rng),
                                         &workspace);
    window_nodes = step.tape_nodes;
    result.max_tape_nodes = step.tape_nodes;
    record(0, step.loss);
  }
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const StepSample sample = draw_sample(problem, config, epoch, rng);
    const StepResult step = compute_step(result.params, problem, config, sample, &workspace);
    if (!std::isfinite(step.loss)) throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch + 1));
    adam_update(result.params.values, adam, step.grad, learning_rate(config, epoch));
    window_nodes = std::max(window_nodes, step.tape_nodes);
    result.max_tape_nodes = std::max(result.max_tape_nodes, step.tape_nodes);
    if ((epoch + 1) % config.eval_every == 0 || epoch + 1 == config.epochs) record(epoch + 1, step.loss);
  }
  result.table_times = ctx.times;
  result.table = affine_table(result.params, problem, config, ctx.times);
  return result;
}

std::size_t memory_account(const StepResult& result) { return result.tape_nodes; }

}  // namespace cpl
