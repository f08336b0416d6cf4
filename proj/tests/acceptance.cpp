// One pass/fail line per acceptance criterion. Exit 0 when every hard
// criterion passes; criterion 7 is reported but not gating.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cpl/baselines.hpp"
#include "cpl/commands.hpp"
#include "cpl/config.hpp"
#include "cpl/sdifp.hpp"
#include "cpl/trainer.hpp"
#include "oracles.hpp"

using namespace cpl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  double observed = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

fs::path work_dir() {
  const char* env = std::getenv("CPL_ACCEPTANCE_DIR");
  return env != nullptr ? fs::path(env) : fs::temp_directory_path() / "cpl_acceptance";
}

PDEProblem with_table(const std::string& name) {
  PDEProblem p = make_problem(name);
  if (p.needs_table()) {
    const ReferenceSolution ref = load_or_solve(p, ReferenceConfig{}, work_dir() / "cache");
    p.table = std::make_shared<InvariantTable>(invariant_table(ref));
  }
  return p;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// 1. Projected moments on the training cloud equal the targets. Reference
// tables are built beforehand; only the projection is timed.
Outcome exact_conservation(const std::vector<PDEProblem>& problems) {
  double worst = 0.0;
  for (const PDEProblem& p : problems) {
    const PointCloud cloud = map_to_domain(quasi_random_points(10000, 1, 0, 0), p.domain);
    const double vol = p.domain.volume();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const MLPParams params = oracle::net(1, 4, 128, 1000 + seed);
      for (double t : {0.0, 0.5 * p.domain.t_end, p.domain.t_end}) {
        // one batched pass serves both the detached moments and the projected field
        auto u = forward_batch(params, cloud, t);
        const AffineParams a = solve_affine(moments_of(u, t), targets_at(p, t));
        for (double& v : u) v = apply_projection(v, a);
        const MomentEstimate m = moments_of(u, t);
        const auto [c1, c2] = invariant_targets(p, t);
        worst = std::max({worst, rel(vol * m.mu1, c1), rel(vol * m.mu2, c2)});
      }
    }
  }
  return {worst, 1e-10, worst <= 1e-10, "max relative residual, 4 problems x 20 nets x 3 times"};
}

// 2. Closed-form roots satisfy the constraint system.
Outcome closed_form_roots() {
  SeededRng rng(2);
  double worst = 0.0;
  bool positive = true;
  for (int n = 0; n < 1000; ++n) {
    MomentEstimate m;
    m.mu1 = 4.0 * rng.uniform() - 2.0;
    m.mu2 = m.mu1 * m.mu1 + 1e-6 + 3.0 * rng.uniform();
    const double c1 = 4.0 * rng.uniform() - 2.0;
    const TargetInvariants tg{c1, c1 * c1 + 1e-4 + 3.0 * rng.uniform()};
    const AffineParams a = solve_affine(m, tg);
    positive = positive && a.alpha > 0.0;
    const auto [r1, r2] = constraint_residuals(m, a, tg);
    worst = std::max({worst, std::abs(r1), std::abs(r2)});
  }
  return {worst, 1e-10, worst <= 1e-10 && positive, positive ? "alpha > 0 on all draws" : "alpha <= 0 seen"};
}

// 3. Jacobians and the projected gradient vs FD of the fully coupled map.
Outcome implicit_gradient() {
  double worst = 0.0;
  SeededRng rng(3);
  for (int inst = 0; inst < 20; ++inst) {
    const MLPParams p = oracle::net(1, 2, 6, 300 + static_cast<std::uint64_t>(inst));
    const PointCloud cloud = map_to_domain(sobol_points(128, 1), Domain({0.0}, {2.0}, 1.0));
    const double c1 = rng.uniform() - 0.5;
    const TargetInvariants tg{c1, c1 * c1 + 0.1 + rng.uniform()};
    const double t = rng.uniform();
    const std::array<double, 1> x{2.0 * rng.uniform()};

    const MomentEstimate m = estimate_moments(p, cloud, t);
    const AffineParams a = solve_affine(m, tg);
    const ProjectionJacobians j = projection_jacobians(m, a);
    auto root = [&](double mu1, double mu2, bool alpha) {
      MomentEstimate q = m;
      q.mu1 = mu1;
      q.mu2 = mu2;
      const AffineParams r = solve_affine(q, tg);
      return alpha ? r.alpha : r.beta;
    };
    // steps well inside the variance so the stencil never reaches the floor
    const double h2 = 1e-3 * m.variance();
    const double h1 = h2 / (1.0 + std::abs(m.mu1));
    const std::array<double, 4> fd{
        oracle::derivative([&](double s) { return root(s, m.mu2, true); }, m.mu1, 1, h1),
        oracle::derivative([&](double s) { return root(m.mu1, s, true); }, m.mu2, 1, h2),
        oracle::derivative([&](double s) { return root(s, m.mu2, false); }, m.mu1, 1, h1),
        oracle::derivative([&](double s) { return root(m.mu1, s, false); }, m.mu2, 1, h2)};
    const std::array<double, 4> an{j.dalpha_dmu1, j.dalpha_dmu2, j.dbeta_dmu1, j.dbeta_dmu2};
    worst = std::max(worst, oracle::scaled_max_err(an, fd));

    Tape tape;
    const ParamVars theta = bind_params(tape, p);
    const auto gu = gather_adjoints(tape.backward(forward(tape, p, theta, x, t)), theta);
    const auto g = projected_grad(a, j, moment_grad_estimates(p, cloud, t), forward(p, x, t), gu);
    const auto coupled = oracle::fd_gradient(p, [&](const MLPParams& q) {
      const AffineParams aq = solve_affine(estimate_moments(q, cloud, t), tg);
      return aq.alpha * forward(q, x, t) + aq.beta;
    });
    worst = std::max(worst, oracle::scaled_max_err(g, coupled));
  }
  return {worst, 1e-5, worst <= 1e-5, "20 instances, Jacobians and coupled-map gradient"};
}

std::vector<std::vector<std::size_t>> pairs_of(std::size_t n) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) out.push_back({a, b});
  }
  return out;
}

// 4. Enumeration mean of the DS-UGE gradient equals the full gradient.
Outcome dsuge_unbiased() {
  ProblemOptions opt;
  opt.dim = 3;
  opt.symmetric_pairs = true;
  const PDEProblem p = make_problem("fokker_planck_linear_nd", opt);
  TrainConfig c;
  c.method = Method::kSdifp;
  c.estimator = Estimator::kDsUge;
  c.subset_i = 2;
  c.subset_j = 2;
  c.batch = 4;
  c.time_slices = 2;
  c.ic_points = 4;
  c.bc_points = 2;
  c.cloud = 512;
  c.width = 8;
  c.layers = 2;
  c.epochs = 20;
  TrainConfig full = c;
  full.estimator = Estimator::kFull;
  const auto subsets = pairs_of(p.n_terms());

  MLPParams params = init_params(network_config(c, p));
  AdamState adam;
  SeededRng rng(4);
  double worst = 0.0;
  std::size_t snapshots = 0;
  for (std::size_t step = 0; step <= 20; ++step) {
    StepSample sample = draw_sample(p, c, step, rng);
    if (step % 5 == 0) {
      const auto exact = compute_step(params, p, full, sample).grad;
      std::vector<double> mean(params.size(), 0.0);
      for (const auto& i : subsets) {
        for (const auto& j : subsets) {
          sample.sets = {i, j};
          const auto g = compute_step(params, p, c, sample).grad;
          for (std::size_t k = 0; k < g.size(); ++k) mean[k] += g[k];
        }
      }
      for (double& v : mean) v /= static_cast<double>(subsets.size() * subsets.size());
      worst = std::max(worst, oracle::scaled_max_err(mean, exact));
      ++snapshots;
    }
    const StepResult res = compute_step(params, p, c, sample);
    adam_update(params.values, adam, res.grad, learning_rate(c, step));
  }
  return {worst, 1e-12, worst <= 1e-12 && p.n_terms() == 6,
          "N_L = " + std::to_string(p.n_terms()) + ", " + std::to_string(snapshots) + " snapshots, 225 pairs each"};
}

// Nearest point to u on {dv 1^T y = c1, dv |y|^2 = c2} by Newton on the Lagrange system.
Eigen::VectorXd lagrange_newton(const Eigen::VectorXd& u, double dv, double c1, double c2, bool linear, bool quad) {
  const auto n = u.size();
  const Eigen::Index k = (linear ? 1 : 0) + (quad ? 1 : 0);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n + k);
  z.head(n) = u;
  for (int iter = 0; iter < 200; ++iter) {
    Eigen::VectorXd f(n + k);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n + k, n + k);
    const Eigen::VectorXd y = z.head(n);
    f.head(n) = 2.0 * (y - u);
    jac.topLeftCorner(n, n).diagonal().setConstant(2.0);
    Eigen::Index row = n;
    if (linear) {
      f.head(n).array() += z(row) * dv;
      jac.block(0, row, n, 1).setConstant(dv);
      jac.block(row, 0, 1, n).setConstant(dv);
      f(row) = dv * y.sum() - c1;
      ++row;
    }
    if (quad) {
      f.head(n) += 2.0 * z(row) * dv * y;
      jac.topLeftCorner(n, n).diagonal().array() += 2.0 * z(row) * dv;
      jac.block(0, row, n, 1) = 2.0 * dv * y;
      jac.block(row, 0, 1, n) = 2.0 * dv * y.transpose();
      f(row) = dv * y.squaredNorm() - c2;
    }
    if (f.norm() < 1e-15) break;
    z -= jac.fullPivLu().solve(f);
  }
  return z.head(n);
}

// 5. Discrete projections vs a numeric constrained least-squares oracle.
Outcome baseline_oracles() {
  SeededRng rng(5);
  double err = 0.0;
  double idem = 0.0;
  for (int inst = 0; inst < 30; ++inst) {
    const std::size_t n = 2 + rng.below(9);
    const double dv = 0.2 + rng.uniform();
    std::vector<double> u(n);
    std::vector<double> near(n);
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = 2.0 * rng.uniform() - 1.0;
      near[i] = u[i] + 0.3 * (rng.uniform() - 0.5);
    }
    double c1 = 0.0;
    double c2 = 0.0;
    for (double v : near) {
      c1 += dv * v;
      c2 += dv * v * v;
    }
    const Eigen::VectorXd ue = Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(n));
    auto diff = [](const std::vector<double>& a, const Eigen::VectorXd& b) {
      double m = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b(static_cast<Eigen::Index>(i))));
      return m;
    };
    auto diffv = [](const std::vector<double>& a, const std::vector<double>& b) {
      double m = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
      return m;
    };
    const auto yl = proj_linear(u, dv, c1);
    const auto yq = proj_quadratic(u, dv, c2);
    const auto yc = proj_combined(u, dv, c1, c2);
    err = std::max({err, diff(yl, lagrange_newton(ue, dv, c1, c2, true, false)),
                    diff(yq, lagrange_newton(ue, dv, c1, c2, false, true)),
                    diff(yc, lagrange_newton(ue, dv, c1, c2, true, true))});
    idem = std::max({idem, diffv(proj_linear(yl, dv, c1), yl), diffv(proj_quadratic(yq, dv, c2), yq),
                     diffv(proj_combined(yc, dv, c1, c2), yc)});
  }
  std::ostringstream d;
  d << "idempotence " << idem << " (tolerance 1e-12)";
  return {err, 1e-9, err <= 1e-9 && idem <= 1e-12, d.str()};
}

// 6 and 7 share the advection runs.
struct TrainingOutcome {
  Outcome conservation;
  Outcome accuracy;
};

TrainingOutcome random_collocation() {
  RunConfig base;
  base.out_dir = work_dir() / "c6";
  base.cache_dir = work_dir() / "cache";
  for (const auto& [k, v] : std::vector<std::pair<std::string, std::string>>{
           {"problem", "advection1d"}, {"epochs", "2000"}, {"batch", "100"}, {"cloud", "1e4"}, {"width", "32"},
           {"layers", "3"}, {"time_slices", "4"}, {"ic_points", "50"}, {"bc_points", "8"}, {"holdout", "16384"},
           {"eval_every", "2000"}, {"input_scaling", "true"}}) {
    set_config_value(base, k, v);
  }
  double sdifp = 0.0;
  double proj = 0.0;
  double error_u = 0.0;
  constexpr int kSeeds = 3;
  for (int seed = 0; seed < kSeeds; ++seed) {
    for (const char* method : {"sdifp", "discrete_proj"}) {
      RunConfig rc = base;
      set_config_value(rc, "seed", std::to_string(seed));
      set_config_value(rc, "method", method);
      std::ostringstream quiet;
      const PreparedProblem prepared = prepare_problem(rc, quiet);
      const TrainResult r = train(prepared.problem, rc.train, prepared.reference.get());
      const MetricsRecord& last = r.history.back();
      const double e = 0.5 * (last.error_c1 + last.error_c2);
      std::printf("    seed %d %-13s error_c1 %.3e error_c2 %.3e error_u %.3e\n", seed, method, last.error_c1,
                  last.error_c2, last.error_u);
      std::fflush(stdout);
      if (std::string(method) == "sdifp") {
        sdifp += e / kSeeds;
        error_u += last.error_u / kSeeds;
      } else {
        proj += e / kSeeds;
      }
    }
  }
  TrainingOutcome out;
  std::ostringstream d;
  d << "discrete_proj " << proj << " = " << proj / sdifp << "x sdifp (need >= 10x)";
  out.conservation = {sdifp, 1e-3, sdifp <= 1e-3 && proj >= 10.0 * sdifp, d.str()};
  out.accuracy = {error_u, 1e-1, error_u <= 1e-1, "seed-averaged Error_u of the sdifp runs"};
  return out;
}

// 8. Tape nodes: subset ratio and independence from the moment cloud.
Outcome memory_scaling() {
  ProblemOptions opt;
  opt.dim = 16;
  const PDEProblem p = make_problem("fokker_planck_linear_nd", opt);
  TrainConfig c;
  c.method = Method::kSdifp;
  c.estimator = Estimator::kDsUge;
  c.subset_i = 4;
  c.subset_j = 4;
  c.batch = 8;
  c.time_slices = 2;
  c.ic_points = 4;
  c.bc_points = 2;
  c.width = 16;
  c.layers = 2;
  const MLPParams params = init_params(network_config(c, p));
  auto nodes = [&](const TrainConfig& cfg) {
    SeededRng rng(8);
    return memory_account(compute_step(params, p, cfg, draw_sample(p, cfg, 0, rng)));
  };
  TrainConfig full = c;
  full.subset_i = 0;
  full.subset_j = 0;
  full.estimator = Estimator::kFull;
  const double ratio = static_cast<double>(nodes(c)) / static_cast<double>(nodes(full));
  bool invariant = true;
  std::size_t base = 0;
  for (std::size_t m : {1000u, 10000u, 100000u}) {
    TrainConfig cm = c;
    cm.cloud = m;
    const std::size_t n = nodes(cm);
    if (base == 0) base = n;
    invariant = invariant && n == base;
  }
  return {ratio, 0.05, ratio <= 0.05 && invariant && p.n_terms() == 256,
          invariant ? "node count identical for M in {1e3, 1e4, 1e5}" : "node count changes with M"};
}

// 9. Shift residual variance law and same-batch exactness.
Outcome variance_law() {
  constexpr int kTrials = 5000;
  constexpr std::size_t kN = 100;
  SeededRng rng(9);
  double sum = 0.0;
  double sq = 0.0;
  double same = 0.0;
  for (int trial = 0; trial < kTrials; ++trial) {
    std::vector<double> fixed(kN);
    std::vector<double> fresh(kN);
    for (double& v : fixed) v = rng.uniform();
    for (double& v : fresh) v = rng.uniform();
    const ShiftResult s = same_batch_shift(fixed, 0.5);
    const double eps = shift_residual(fresh, s.delta, 0.5);
    sum += eps;
    sq += eps * eps;
    same = std::max(same, std::abs(shift_residual(s.shifted, 0.0, 0.5)));
  }
  const double var = sq / kTrials - (sum / kTrials) * (sum / kTrials);
  const double ratio = var / (2.0 * (1.0 / 12.0) / static_cast<double>(kN));
  std::ostringstream d;
  d << "variance / (2 sigma^2 / N) = " << ratio << ", same-batch max " << same << " (tolerance 1e-14)";
  return {std::abs(ratio - 1.0), 0.3, std::abs(ratio - 1.0) <= 0.3 && same <= 1e-14, d.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 10. Two identical train invocations give byte-identical metrics.
Outcome determinism() {
  std::vector<std::string> files;
  for (const char* run : {"c10a", "c10b"}) {
    RunConfig rc;
    rc.out_dir = work_dir() / run;
    rc.cache_dir = work_dir() / "cache";
    for (const auto& [k, v] : std::vector<std::pair<std::string, std::string>>{
             {"problem", "advection1d"}, {"epochs", "100"}, {"eval_every", "10"}, {"width", "16"}, {"layers", "2"},
             {"batch", "32"}, {"cloud", "1000"}, {"holdout", "4096"}, {"seed", "7"}}) {
      set_config_value(rc, k, v);
    }
    std::ostringstream quiet;
    cmd_train(rc, quiet);
    files.push_back(slurp(rc.out_dir / "metrics.csv"));
  }
  const bool same = !files[0].empty() && files[0] == files[1];
  return {same ? 0.0 : 1.0, 0.0, same, "metrics.csv compared byte for byte"};
}

bool report(int id, const std::string& name, double budget_s, const std::function<Outcome()>& run,
            bool gating = true) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = run();
  } catch (const std::exception& e) {
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs <= budget_s;
  const bool ok = o.passed && in_time;
  const char* verdict = ok ? "PASS" : gating ? "FAIL" : "REPORT";
  std::printf("C%-2d %-6s %-34s observed %.3e tolerance %.1e  %.1fs/%.0fs  %s%s\n", id, verdict, name.c_str(),
              o.observed, o.tolerance, secs, budget_s, o.detail.c_str(), in_time ? "" : " (over time budget)");
  std::fflush(stdout);
  return ok || !gating;
}

}  // namespace

int main() {
  fs::create_directories(work_dir());
  bool ok = true;
  std::vector<PDEProblem> one_d;
  for (const char* name : {"advection1d", "reaction_diffusion1d", "wave1d", "kdv1d"}) one_d.push_back(with_table(name));
  ok &= report(1, "exact conservation", 30, [&] { return exact_conservation(one_d); });
  ok &= report(2, "closed-form roots", 1, closed_form_roots);
  ok &= report(3, "implicit gradient", 120, implicit_gradient);
  ok &= report(4, "DS-UGE unbiasedness", 300, dsuge_unbiased);
  ok &= report(5, "baseline oracles", 10, baseline_oracles);
  TrainingOutcome training;
  ok &= report(6, "random-collocation failure mode", 1800, [&] {
    training = random_collocation();
    return training.conservation;
  });
  // Training-quality claim: reported, not gating.
  ok &= report(7, "solution accuracy", 1800, [&] { return training.accuracy; }, false);
  ok &= report(8, "memory scaling", 300, memory_scaling);
  ok &= report(9, "variance law", 60, variance_law);
  ok &= report(10, "determinism", 600, determinism);
  std::printf("%s\n", ok ? "acceptance: all gating criteria passed" : "acceptance: FAILED");
  return ok ? 0 : 1;
}
