#include "cpl/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <limits>

#include "cpl/baselines.hpp"
#include "cpl/errors.hpp"
#include "cpl/jet.hpp"
#include "cpl/mlp.hpp"
#include "cpl/pde.hpp"
#include "cpl/refsolve.hpp"
#include "cpl/sampler.hpp"
#include "cpl/sdifp.hpp"
#include "cpl/tape.hpp"
#include "cpl/trainer.hpp"

namespace cpl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Check {
  std::string module;
  std::string name;
  double tolerance;
  std::function<double()> observe;
};

double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Relative error of a vector against a reference, scaled by the reference norm.
double vector_rel_err(std::span<const double> a, std::span<const double> ref) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    num = std::max(num, std::abs(a[k] - ref[k]));
    den = std::max(den, std::abs(ref[k]));
  }
  return num / std::max(den, 1e-300);
}

std::filesystem::path scratch_file(const std::string& stem) {
  SeededRng rng(static_cast<std::uint64_t>(std::hash<std::string>{}(stem)) ^
                static_cast<std::uint64_t>(std::filesystem::file_time_type::clock::now().time_since_epoch().count()));
  return std::filesystem::temp_directory_path() / (stem + "_" + std::to_string(rng.next_u64()));
}

MLPParams small_net(std::size_t dim, std::size_t layers, std::size_t width, std::uint64_t seed) {
  NetworkConfig nc;
  nc.spatial_dim = dim;
  nc.hidden_layers = layers;
  nc.width = width;
  nc.seed = seed;
  return init_params(nc);
}

std::vector<double> tape_grad_forward(const MLPParams& params, std::span<const double> x, double t) {
  Tape tape;
  const ParamVars theta = bind_params(tape, params);
  const Var u = forward(tape, params, theta, x, t);
  return gather_adjoints(tape.backward(u), theta);
}

// Central difference of f along parameter k with h = 1e-5 max(1, |theta_k|).
template <typename F>
double fd_param(MLPParams params, std::size_t k, const F& f) {
  const double h = 1e-5 * std::max(1.0, std::abs(params.values[k]));
  const double base = params.values[k];
  params.values[k] = base + h;
  const double up = f(params);
  params.values[k] = base - h;
  const double down = f(params);
  return (up - down) / (2.0 * h);
}

// Advecting gaussian exp(-((x - 1 - c t) / w)^2) as a jet along `coord`.
FieldEvaluator advected_pulse(double c, double w) {
  return [c, w](Tape& tape, std::span<const double> x, double t, std::size_t coord, int order) {
    const std::array<Var, 2> point{Var{x[0]}, Var{t}};
    const JetFunction f = [c, w](Tape& tp, std::span<const Jet> in) {
      const Jet ct = jet::scale(tp, in[1], Var{c});
      const Jet z = jet::shift(tp, jet::sub(tp, in[0], ct), Var{-1.0});
      return jet::exp(tp, jet::scale(tp, jet::pow2(tp, z), Var{-1.0 / (w * w)}));
    };
    return jet_eval(tape, f, point, static_cast<int>(coord), order);
  };
}

std::vector<Check> build_checks(const VerifyOptions& options) {
  std::vector<Check> checks;

  // adcore
  checks.push_back({"adcore", "product_tanh_gradient", 0.0, [] {
                      Tape tape;
                      const Var x = tape.leaf(2.0);
                      const Var y = tape.leaf(0.0);
                      const Var f = tape.mul(x, tape.tanh(y));
                      const auto adj = tape.backward(f);
                      return std::abs(adj[x.index] - 0.0) + std::abs(adj[y.index] - 2.0);
                    }});
  checks.push_back({"adcore", "mlp_gradient_vs_fd", 1e-6, [] {
                      const MLPParams p = small_net(1, 2, 5, 11);
                      const std::array<double, 1> x{0.37};
                      const double t = 0.61;
                      const auto g = tape_grad_forward(p, x, t);
                      double worst = 0.0;
                      for (std::size_t k = 0; k < p.size(); ++k) {
                        const double fd = fd_param(p, k, [&](const MLPParams& q) { return forward(q, x, t); });
                        worst = std::max(worst, rel_err(g[k], fd, 1e-6));
                      }
                      return worst;
                    }});
  checks.push_back({"adcore", "tanh_jet_analytic", 1e-12, [] {
                      Tape tape;
                      const double x = 0.7;
                      const Jet j = jet::tanh(tape, Jet::variable(tape.leaf(x), 3));
                      const double y = std::tanh(x);
                      const double s = 1.0 - y * y;
                      const std::array<double, 4> exact{y, s, -2.0 * y * s, -2.0 * s * (1.0 - 3.0 * y * y)};
                      double worst = 0.0;
                      for (int k = 0; k <= 3; ++k) worst = std::max(worst, std::abs(j.derivative(k) - exact[k]));
                      return worst;
                    }});
  checks.push_back({"adcore", "sin_cos_jet_analytic", 1e-14, [] {
                      Tape tape;
                      const double x = 0.3;
                      const Jet j = jet::sin(tape, Jet::variable(tape.leaf(x), 3));
                      const std::array<double, 4> exact{std::sin(x), std::cos(x), -std::sin(x), -std::cos(x)};
                      double worst = 0.0;
                      for (int k = 0; k <= 3; ++k) worst = std::max(worst, std::abs(j.derivative(k) - exact[k]));
                      return worst;
                    }});
  checks.push_back({"adcore", "jet_coefficient_gradient_vs_fd", 1e-6, [] {
                      const MLPParams p = small_net(1, 2, 4, 5);
                      const std::array<double, 1> x{1.2};
                      const double t = 0.3;
                      Tape tape;
                      const ParamVars theta = bind_params(tape, p);
                      const Jet j = forward_jet(tape, p, theta, x, t, 0, 2);
                      const auto g = gather_adjoints(tape.backward(j[2]), theta);
                      double worst = 0.0;
                      for (std::size_t k = 0; k < p.size(); ++k) {
                        const double fd = fd_param(p, k, [&](const MLPParams& q) {
                          Tape tp;
                          return forward_jet(tp, q, constant_params(q), x, t, 0, 2)[2].value;
                        });
                        worst = std::max(worst, rel_err(g[k], fd, 1e-6));
                      }
                      return worst;
                    }});

  // sampler
  checks.push_back({"sampler", "sobol_leading_points", 0.0, [] {
                      const PointCloud c = sobol_points(4, 3);
                      const std::array<double, 12> expected{0.5,  0.5,  0.5,  0.75,  0.25,  0.25,
                                                            0.25, 0.75, 0.75, 0.375, 0.375, 0.625};
                      double worst = 0.0;
                      for (std::size_t k = 0; k < expected.size(); ++k) {
                        worst = std::max(worst, std::abs(c.coords[k] - expected[k]));
                      }
                      return worst;
                    }});
  checks.push_back({"sampler", "sobol_mean_d8", 1e-3, [] {
                      const PointCloud c = sobol_points(1 << 14, 8);
                      double worst = 0.0;
                      for (std::size_t k = 0; k < 8; ++k) {
                        double s = 0.0;
                        for (std::size_t i = 0; i < c.size(); ++i) s += c.point(i)[k];
                        worst = std::max(worst, std::abs(s / static_cast<double>(c.size()) - 0.5));
                      }
                      return worst;
                    }});
  checks.push_back({"sampler", "subset_inclusion_uniform_sigmas", 5.0, [] {
                      SeededRng rng(3);
                      const std::size_t n = 10;
                      const std::size_t size = 3;
                      const std::size_t trials = 4000;
                      std::vector<double> hits(n, 0.0);
                      for (std::size_t r = 0; r < trials; ++r) {
                        const auto s = sample_subset(n, size, rng);
                        if (s.size() != size || !std::is_sorted(s.begin(), s.end()) ||
                            std::adjacent_find(s.begin(), s.end()) != s.end() || s.back() >= n) {
                          return kInf;
                        }
                        for (auto i : s) hits[i] += 1.0;
                      }
                      const double p = static_cast<double>(size) / static_cast<double>(n);
                      const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
                      double worst = 0.0;
                      for (double h : hits) worst = std::max(worst, std::abs(h / trials - p) / sigma);
                      return worst;
                    }});
  checks.push_back({"sampler", "rng_reproducible", 0.0, [] {
                      SeededRng a(42);
                      SeededRng b(42);
                      double mismatches = 0.0;
                      for (int k = 0; k < 1000; ++k) mismatches += a.next_u64() != b.next_u64() ? 1.0 : 0.0;
                      return mismatches;
                    }});

  // net
  checks.push_back({"net", "jet_value_equals_forward", 0.0, [] {
                      const MLPParams p = small_net(2, 3, 8, 9);
                      SeededRng rng(1);
                      double worst = 0.0;
                      for (int k = 0; k < 10; ++k) {
                        const std::array<double, 2> x{2.0 * rng.uniform(), 2.0 * rng.uniform()};
                        const double t = rng.uniform();
                        Tape tape;
                        const double jv = forward_jet(tape, p, constant_params(p), x, t, k % 3, 3)[0].value;
                        worst = std::max(worst, std::abs(jv - forward(p, x, t)));
                      }
                      return worst;
                    }});
  checks.push_back({"net", "zero_params_output", 0.0, [] {
                      NetworkConfig nc;
                      nc.width = 6;
                      nc.hidden_layers = 2;
                      const MLPParams p = zero_params(nc);
                      const std::array<double, 1> x{0.8};
                      return std::abs(forward(p, x, 0.4));
                    }});
  checks.push_back({"net", "checkpoint_roundtrip", 0.0, [] {
                      const MLPParams p = small_net(1, 2, 7, 21);
                      const auto path = scratch_file("cpl_ckpt");
                      save_checkpoint(p, path);
                      const MLPParams q = load_checkpoint(p.config, path);
                      std::filesystem::remove(path);
                      double worst = 0.0;
                      for (std::size_t k = 0; k < p.size(); ++k) worst = std::max(worst, std::abs(p.values[k] - q.values[k]));
                      return worst;
                    }});

  // sdifp
  checks.push_back({"sdifp", "closed_form_constraint_residuals", 1e-10, [] {
                      SeededRng rng(17);
                      double worst = 0.0;
                      for (int k = 0; k < 1000; ++k) {
                        MomentEstimate m;
                        m.mu1 = 4.0 * rng.uniform() - 2.0;
                        m.mu2 = m.mu1 * m.mu1 + 1e-3 + 3.0 * rng.uniform();
                        m.m = 100;
                        TargetInvariants tg;
                        tg.c1_bar = 2.0 * rng.uniform() - 1.0;
                        tg.c2_bar = tg.c1_bar * tg.c1_bar + 1e-3 + rng.uniform();
                        const AffineParams a = solve_affine(m, tg);
                        if (!(a.alpha > 0.0)) return kInf;
                        const auto [r1, r2] = constraint_residuals(m, a, tg);
                        worst = std::max(worst, std::max(std::abs(r1), std::abs(r2)) / (1.0 + std::abs(tg.c2_bar)));
                      }
                      return worst;
                    }});
  checks.push_back({"sdifp", "projected_moments_exact_on_cloud", 1e-10, [] {
                      const PDEProblem problem = make_problem("kdv1d");
                      const MLPParams p = small_net(1, 3, 16, 4);
                      const PointCloud cloud = map_to_domain(sobol_points(10000, 1), problem.domain);
                      double worst = 0.0;
                      for (double t : {0.0, 0.35, 1.0}) {
                        const TargetInvariants tg = targets_at(problem, t);
                        const AffineParams a = solve_affine(estimate_moments(p, cloud, t), tg);
                        auto u = forward_batch(p, cloud, t);
                        for (double& v : u) v = apply_projection(v, a);
                        const MomentEstimate m = moments_of(u, t);
                        worst = std::max({worst, std::abs(m.mu1 - tg.c1_bar) / std::abs(tg.c1_bar),
                                          std::abs(m.mu2 - tg.c2_bar) / std::abs(tg.c2_bar)});
                      }
                      return worst;
                    }});
  const bool flip = options.inject_fault == "jacobian_sign";
  checks.push_back({"sdifp", "jacobians_vs_fd", 1e-6, [flip] {
                      SeededRng rng(23);
                      double worst = 0.0;
                      for (int k = 0; k < 20; ++k) {
                        MomentEstimate m;
                        m.mu1 = rng.uniform() - 0.5;
                        m.mu2 = m.mu1 * m.mu1 + 0.1 + rng.uniform();
                        m.m = 100;
                        const TargetInvariants tg{0.3, 0.3 * 0.3 + 0.2 + rng.uniform()};
                        const AffineParams a = solve_affine(m, tg);
                        ProjectionJacobians jac = projection_jacobians(m, a);
                        if (flip) jac.dalpha_dmu2 = -jac.dalpha_dmu2;
                        const double h = 1e-6;
                        auto at = [&](double d1, double d2) {
                          MomentEstimate q = m;
                          q.mu1 += d1;
                          q.mu2 += d2;
                          return solve_affine(q, tg);
                        };
                        const AffineParams p1 = at(h, 0.0), m1 = at(-h, 0.0), p2 = at(0.0, h), m2 = at(0.0, -h);
                        const std::array<double, 4> fd{(p1.alpha - m1.alpha) / (2 * h), (p2.alpha - m2.alpha) / (2 * h),
                                                       (p1.beta - m1.beta) / (2 * h), (p2.beta - m2.beta) / (2 * h)};
                        const std::array<double, 4> an{jac.dalpha_dmu1, jac.dalpha_dmu2, jac.dbeta_dmu1, jac.dbeta_dmu2};
                        for (int i = 0; i < 4; ++i) worst = std::max(worst, rel_err(an[i], fd[i], 1e-3));
                      }
                      return worst;
                    }});
  checks.push_back({"sdifp", "projected_grad_vs_coupled_fd", 1e-5, [] {
                      const PDEProblem problem = make_problem("kdv1d");
                      const MLPParams p = small_net(1, 2, 6, 8);
                      const PointCloud cloud = map_to_domain(sobol_points(64, 1), problem.domain);
                      const double t = 0.5;
                      const std::array<double, 1> x{0.77};
                      const TargetInvariants tg = targets_at(problem, t);
                      const MomentEstimate m = estimate_moments(p, cloud, t);
                      const AffineParams a = solve_affine(m, tg);
                      const auto g = projected_grad(a, projection_jacobians(m, a), moment_grad_estimates(p, cloud, t),
                                                    forward(p, x, t), tape_grad_forward(p, x, t));
                      double worst = 0.0;
                      for (std::size_t k = 0; k < p.size(); ++k) {
                        const double fd = fd_param(p, k, [&](const MLPParams& q) {
                          return apply_projection(forward(q, x, t), solve_affine(estimate_moments(q, cloud, t), tg));
                        });
                        worst = std::max(worst, rel_err(g[k], fd, 1e-4));
                      }
                      return worst;
                    }});
  checks.push_back({"sdifp", "same_batch_shift_exact", 1e-14, [] {
                      SeededRng rng(5);
                      double worst = 0.0;
                      for (int k = 0; k < 200; ++k) {
                        std::vector<double> b(100);
                        for (double& v : b) v = 3.0 * rng.uniform() - 1.0;
                        const double c1 = 2.0 * rng.uniform() - 1.0;
                        const ShiftResult s = same_batch_shift(b, c1);
                        worst = std::max(worst, std::abs(shift_residual(b, s.delta, c1)) / (1.0 + std::abs(c1)));
                      }
                      return worst;
                    }});
  checks.push_back({"sdifp", "ill_posed_targets_rejected", 0.0, [] {
                      MomentEstimate m;
                      m.mu1 = 0.0;
                      m.mu2 = 1.0;
                      m.m = 10;
                      try {
                        (void)solve_affine(m, TargetInvariants{1.0, 0.5});
                      } catch (const NumericalError&) {
                        return 0.0;
                      }
                      return 1.0;
                    }});

  // baselines
  auto random_field = [](std::uint64_t seed, std::size_t n) {
    SeededRng rng(seed);
    std::vector<double> u(n);
    for (double& v : u) v = 2.0 * rng.uniform() - 0.5;
    return u;
  };
  auto riemann = [](std::span<const double> y, double dv) {
    double s1 = 0.0;
    double s2 = 0.0;
    for (double v : y) {
      s1 += v;
      s2 += v * v;
    }
    return std::pair{dv * s1, dv * s2};
  };
  checks.push_back({"baselines", "proj_linear_constraint_idempotent", 1e-12, [=] {
                      const auto u = random_field(1, 9);
                      const double dv = 0.2;
                      const auto y = proj_linear(u, dv, 0.7);
                      const auto yy = proj_linear(y, dv, 0.7);
                      return std::max(std::abs(riemann(y, dv).first - 0.7), vector_rel_err(yy, y));
                    }});
  checks.push_back({"baselines", "proj_quadratic_constraint_idempotent", 1e-12, [=] {
                      const auto u = random_field(2, 9);
                      const double dv = 0.2;
                      const auto y = proj_quadratic(u, dv, 0.9);
                      const auto yy = proj_quadratic(y, dv, 0.9);
                      return std::max(std::abs(riemann(y, dv).second - 0.9), vector_rel_err(yy, y));
                    }});
  checks.push_back({"baselines", "proj_combined_kkt", 1e-9, [=] {
                      const auto u = random_field(3, 8);
                      const double dv = 0.25;
                      const double c1 = 0.5;
                      const double c2 = 1.1;
                      const auto y = proj_combined(u, dv, c1, c2);
                      const auto [r1, r2] = riemann(y, dv);
                      // stationarity: y - u lies in span{1, y}
                      const std::size_t n = y.size();
                      double a11 = static_cast<double>(n), a12 = 0.0, a22 = 0.0, b1 = 0.0, b2 = 0.0;
                      for (std::size_t i = 0; i < n; ++i) {
                        const double r = y[i] - u[i];
                        a12 += y[i];
                        a22 += y[i] * y[i];
                        b1 += r;
                        b2 += r * y[i];
                      }
                      const double det = a11 * a22 - a12 * a12;
                      const double l1 = (b1 * a22 - b2 * a12) / det;
                      const double l2 = (a11 * b2 - a12 * b1) / det;
                      double stationarity = 0.0;
                      for (std::size_t i = 0; i < n; ++i) {
                        stationarity = std::max(stationarity, std::abs(y[i] - u[i] - l1 - l2 * y[i]));
                      }
                      const auto yy = proj_combined(y, dv, c1, c2);
                      return std::max({std::abs(r1 - c1), std::abs(r2 - c2), stationarity, vector_rel_err(yy, y)});
                    }});
  checks.push_back({"baselines", "grid_preflight_refuses_2pow21", 0.0, [] {
                      try {
                        preflight_grid(std::size_t{1} << 21, 256);
                      } catch (const ConfigError&) {
                        return 0.0;
                      }
                      return 1.0;
                    }});

  // pde
  checks.push_back({"pde", "advection_exact_solution_residual", 1e-12, [] {
                      const PDEProblem problem = make_problem("advection1d");
                      const FieldEvaluator field = advected_pulse(problem.constants.at("c"), 0.25);
                      SeededRng rng(2);
                      double worst = 0.0;
                      for (int k = 0; k < 10; ++k) {
                        const std::array<double, 1> x{2.0 * rng.uniform()};
                        Tape tape;
                        worst = std::max(worst, std::abs(residual_full(tape, problem, field, x, 0.4 * rng.uniform()).value));
                      }
                      return worst;
                    }});
  checks.push_back({"pde", "invariant_table_interpolation", 1e-15, [] {
                      const InvariantTable tab{{0.0, 0.5, 1.0}, {1.0, 2.0, 4.0}, {3.0, 3.0, 1.0}};
                      const auto [a1, a2] = tab.at(0.5);
                      const auto [b1, b2] = tab.at(0.75);
                      return std::max({std::abs(a1 - 2.0), std::abs(a2 - 3.0), std::abs(b1 - 3.0), std::abs(b2 - 2.0)});
                    }});
  checks.push_back({"pde", "ds_uge_enumeration_unbiased", 1e-12, [] {
                      ProblemOptions po;
                      po.dim = 3;
                      po.symmetric_pairs = true;
                      const PDEProblem problem = make_problem("fokker_planck_linear_nd", po);
                      TrainConfig c;
                      c.problem = problem.name;
                      c.method = Method::kSdifp;
                      c.batch = 3;
                      c.time_slices = 1;
                      c.ic_points = 2;
                      c.bc_points = 1;
                      c.cloud = 64;
                      c.width = 4;
                      c.layers = 1;
                      c.subset_i = 2;
                      c.subset_j = 2;
                      const MLPParams p = init_params(network_config(c, problem));
                      SeededRng rng(9);
                      StepSample s = draw_sample(problem, c, 0, rng);
                      TrainConfig full_cfg = c;
                      full_cfg.estimator = Estimator::kFull;
                      const auto full = compute_step(p, problem, full_cfg, s).grad;
                      c.estimator = Estimator::kDsUge;
                      std::vector<std::vector<std::size_t>> pairs;
                      for (std::size_t i = 0; i < 6; ++i) {
                        for (std::size_t j = i + 1; j < 6; ++j) pairs.push_back({i, j});
                      }
                      std::vector<double> mean(full.size(), 0.0);
                      for (const auto& si : pairs) {
                        for (const auto& sj : pairs) {
                          s.sets = {si, sj};
                          const auto g = compute_step(p, problem, c, s).grad;
                          for (std::size_t k = 0; k < g.size(); ++k) mean[k] += g[k];
                        }
                      }
                      for (double& v : mean) v /= static_cast<double>(pairs.size() * pairs.size());
                      return vector_rel_err(mean, full);
                    }});

  // refsolve
  checks.push_back({"refsolve", "advection_mass_conserved", 1e-3, [] {
                      ReferenceConfig rc;
                      rc.nx = 256;
                      rc.stamps = 5;
                      const ReferenceSolution r = solve_reference(make_problem("advection1d"), rc);
                      return std::abs(r.c1.back() - r.c1.front()) / std::abs(r.c1.front());
                    }});
  checks.push_back({"refsolve", "reaction_diffusion_mass_growth", 1e-3, [] {
                      const PDEProblem problem = make_problem("reaction_diffusion1d");
                      ReferenceConfig rc;
                      rc.nx = 256;
                      rc.stamps = 5;
                      const ReferenceSolution r = solve_reference(problem, rc);
                      const double expected = std::exp(problem.c1.rate * r.times.back());
                      return std::abs(r.c1.back() / r.c1.front() - expected) / expected;
                    }});
  checks.push_back({"refsolve", "kdv_dispersive_cfl_refused", 0.0, [] {
                      ReferenceConfig rc;
                      rc.nx = 256;
                      rc.dt = 1e-2;
                      try {
                        (void)solve_reference(make_problem("kdv1d"), rc);
                      } catch (const ConfigError&) {
                        return 0.0;
                      }
                      return 1.0;
                    }});
  checks.push_back({"refsolve", "cache_roundtrip", 0.0, [] {
                      const PDEProblem problem = make_problem("wave1d");
                      ReferenceConfig rc;
                      rc.nx = 64;
                      rc.stamps = 3;
                      const ReferenceSolution r = solve_reference(problem, rc);
                      const auto path = scratch_file("cpl_ref");
                      const std::uint64_t h = reference_hash(problem, rc);
                      save_reference(r, h, path);
                      ReferenceSolution back;
                      const bool ok = load_reference(path, h, back);
                      ReferenceSolution other;
                      const bool wrong_hash = load_reference(path, h + 1, other);
                      std::filesystem::remove(path);
                      if (!ok || wrong_hash || back.snapshots.size() != r.snapshots.size()) return kInf;
                      double worst = 0.0;
                      for (std::size_t s = 0; s < r.snapshots.size(); ++s) {
                        for (std::size_t i = 0; i < r.snapshots[s].size(); ++i) {
                          worst = std::max(worst, std::abs(r.snapshots[s][i] - back.snapshots[s][i]));
                        }
                      }
                      return worst;
                    }});

  // trainer
  checks.push_back({"trainer", "adam_first_step", 1e-15, [] {
                      std::vector<double> theta{1.0, -2.0, 0.5};
                      const std::vector<double> g{0.3, -1e-3, 0.0};
                      AdamState st;
                      const double lr = 1e-3;
                      adam_update(theta, st, g, lr);
                      double worst = 0.0;
                      const std::array<double, 3> start{1.0, -2.0, 0.5};
                      for (std::size_t k = 0; k < 3; ++k) {
                        const double expected = start[k] - lr * g[k] / (std::abs(g[k]) + kAdamEps);
                        worst = std::max(worst, std::abs(theta[k] - expected));
                      }
                      return worst;
                    }});
  checks.push_back({"trainer", "linear_decay_schedule", 1e-18, [] {
                      TrainConfig c;
                      c.epochs = 2000;
                      c.lr0 = 1e-3;
                      return std::max({std::abs(learning_rate(c, 0) - 1e-3), std::abs(learning_rate(c, 1000) - 5e-4),
                                       std::abs(learning_rate(c, 2000))});
                    }});
  checks.push_back({"trainer", "step_deterministic", 0.0, [] {
                      const PDEProblem problem = make_problem("kdv1d");
                      TrainConfig c;
                      c.batch = 8;
                      c.cloud = 256;
                      c.width = 6;
                      c.layers = 2;
                      c.ic_points = 4;
                      c.bc_points = 2;
                      c.time_slices = 2;
                      const MLPParams p = init_params(network_config(c, problem));
                      SeededRng r1(4);
                      SeededRng r2(4);
                      const auto a = compute_step(p, problem, c, draw_sample(problem, c, 3, r1));
                      const auto b = compute_step(p, problem, c, draw_sample(problem, c, 3, r2));
                      double diff = a.loss == b.loss ? 0.0 : 1.0;
                      for (std::size_t k = 0; k < a.grad.size(); ++k) diff += a.grad[k] == b.grad[k] ? 0.0 : 1.0;
                      return diff;
                    }});
  checks.push_back({"trainer", "sdifp_step_gradient_vs_fd", 1e-5, [] {
                      const PDEProblem problem = make_problem("kdv1d");
                      TrainConfig c;
                      c.width = 5;
                      c.layers = 2;
                      const MLPParams p = init_params(network_config(c, problem));
                      // one residual slice whose batch is the whole moment cloud
                      StepSample s;
                      Slice sl;
                      sl.t = 0.4;
                      sl.batch = map_to_domain(sobol_points(16, 1), problem.domain);
                      s.moment_cloud = sl.batch;
                      s.slices.push_back(sl);
                      const auto g = compute_step(p, problem, c, s).grad;
                      double worst = 0.0;
                      for (std::size_t k = 0; k < p.size(); ++k) {
                        const double fd = fd_param(p, k, [&](const MLPParams& q) { return compute_step(q, problem, c, s).loss; });
                        worst = std::max(worst, rel_err(g[k], fd, 1e-4));
                      }
                      return worst;
                    }});
  return checks;
}

}  // namespace

std::vector<std::string> fault_names() { return {"jacobian_sign"}; }

std::vector<CheckResult> run_verify(const VerifyOptions& options,
                                    const std::function<void(const CheckResult&)>& on_result) {
  if (!options.inject_fault.empty()) {
    const auto names = fault_names();
    if (std::find(names.begin(), names.end(), options.inject_fault) == names.end()) {
      throw ConfigError("unknown fault '" + options.inject_fault + "'");
    }
  }
  std::vector<CheckResult> results;
  for (const Check& check : build_checks(options)) {
    CheckResult r{check.module, check.name, 0.0, check.tolerance, false, {}};
    try {
      r.observed = check.observe();
      r.passed = std::isfinite(r.observed) && r.observed <= check.tolerance;
    } catch (const std::exception& e) {
      r.observed = kInf;
      r.detail = e.what();
    }
    results.push_back(r);
    if (on_result) on_result(results.back());
  }
  return results;
}

}  // namespace cpl
