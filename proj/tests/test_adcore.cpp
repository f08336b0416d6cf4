#include <doctest.h>

#include <array>
#include <cmath>
#include <functional>
#include <string>

#include "cpl/errors.hpp"
#include "cpl/jet.hpp"
#include "cpl/mlp.hpp"
#include "cpl/pde.hpp"
#include "cpl/sampler.hpp"
#include "cpl/tape.hpp"
#include "oracles.hpp"

using namespace cpl;

namespace {
constexpr std::size_t kPinnedKdvResidualNodes = 241;
}  // namespace

TEST_CASE("record stores values and local partials") {
  Tape tape;
  const Var a = tape.leaf(3.0);
  const Var b = tape.leaf(3.0);
  const Var m = tape.mul(a, b);
  CHECK(m.value == 9.0);
  const auto partials = tape.partials(static_cast<std::size_t>(m.index));
  REQUIRE(partials.size() == 2);
  CHECK(partials[0] == 3.0);
  CHECK(partials[1] == 3.0);

  const Var t = tape.tanh(tape.leaf(0.0));
  CHECK(t.value == 0.0);
  CHECK(tape.partials(static_cast<std::size_t>(t.index))[0] == 1.0);

  const Var e = tape.exp(tape.leaf(1.0));
  CHECK(e.value == doctest::Approx(2.718281828).epsilon(1e-9));
  CHECK(tape.partials(static_cast<std::size_t>(e.index))[0] == e.value);
}

TEST_CASE("domain errors for division by zero and sqrt of a negative") {
  Tape tape;
  const Var x = tape.leaf(1.0);
  CHECK_THROWS_AS(tape.div(x, tape.leaf(0.0)), DomainError);
  CHECK_THROWS_AS(tape.sqrt(tape.leaf(-1.0)), DomainError);
}

TEST_CASE("constants never create nodes") {
  Tape tape;
  const Var c = tape.mul(Var{2.0}, Var{3.0});
  CHECK(c.is_constant());
  CHECK(c.value == 6.0);
  CHECK(tape.node_count() == 0);
}

TEST_CASE("backward on small closed forms") {
  Tape tape;
  const Var x = tape.leaf(3.0);
  CHECK(tape.backward(tape.pow2(x))[x.index] == 6.0);

  Tape t2;
  const Var a = t2.leaf(2.0);
  const Var b = t2.leaf(0.0);
  const auto adj = t2.backward(t2.mul(a, t2.tanh(b)));
  CHECK(adj[a.index] == 0.0);
  CHECK(adj[b.index] == 2.0);
}

TEST_CASE("tape is topologically ordered") {
  const MLPParams p = oracle::net(2, 3, 6, 1);
  Tape tape;
  const ParamVars theta = bind_params(tape, p);
  const std::array<double, 2> x{0.3, 1.1};
  (void)forward_jet(tape, p, theta, x, 0.2, 0, 3);
  for (std::size_t n = 0; n < tape.node_count(); ++n) {
    for (auto parent : tape.parents(n)) REQUIRE(static_cast<std::size_t>(parent) < n);
  }
}

TEST_CASE("network parameter gradients match finite differences on 20 random nets") {
  SeededRng rng(77);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MLPParams p = oracle::net(1, 2, 6, seed);
    const std::array<double, 1> x{2.0 * rng.uniform()};
    const double t = rng.uniform();
    Tape tape;
    const ParamVars theta = bind_params(tape, p);
    const auto g = gather_adjoints(tape.backward(forward(tape, p, theta, x, t)), theta);
    const auto fd = oracle::fd_gradient(p, [&](const MLPParams& q) { return forward(q, x, t); });
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (std::abs(fd[k]) < 1e-6) {
        CHECK(std::abs(g[k] - fd[k]) <= 1e-4);
      } else {
        CHECK(oracle::rel_err(g[k], fd[k]) <= 1e-6);
      }
    }
  }
}

TEST_CASE("jet Taylor coefficients of sin and exp at zero") {
  Tape tape;
  const Jet s = jet::sin(tape, Jet::variable(tape.leaf(0.0), 3));
  CHECK(s[0].value == 0.0);
  CHECK(s[1].value == doctest::Approx(1.0));
  CHECK(std::abs(s[2].value) <= 1e-16);
  CHECK(s[3].value == doctest::Approx(-1.0 / 6.0));
  const Jet e = jet::exp(tape, Jet::variable(tape.leaf(0.0), 3));
  CHECK(e[0].value == doctest::Approx(1.0));
  CHECK(e[1].value == doctest::Approx(1.0));
  CHECK(e[2].value == doctest::Approx(0.5));
  CHECK(e[3].value == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("tanh jet at 0.7 matches Richardson finite differences") {
  Tape tape;
  const Jet j = jet::tanh(tape, Jet::variable(tape.leaf(0.7), 3));
  const auto f = [](double x) { return std::tanh(x); };
  for (int k = 1; k <= 3; ++k) {
    CHECK(oracle::rel_err(j.derivative(k), oracle::derivative(f, 0.7, k, 1e-2)) <= 1e-5);
  }
}

namespace {

struct Primitive {
  const char* name;
  std::function<Jet(Tape&, const Jet&)> jet_fn;
  std::function<double(double)> scalar;
  double lo;
  double hi;
};

}  // namespace

TEST_CASE("every primitive's jet agrees with finite differences at 100 random points") {
  // each primitive applied to g(s) = s + 0.3 sin(s) so chain terms are exercised
  const auto inner_scalar = [](double s) { return s + 0.3 * std::sin(s); };
  const auto inner_jet = [](Tape& t, const Jet& s) {
    return jet::add(t, s, jet::scale(t, jet::sin(t, s), Var{0.3}));
  };
  const std::vector<Primitive> prims = {
      {"tanh", [](Tape& t, const Jet& a) { return jet::tanh(t, a); }, [](double v) { return std::tanh(v); }, -2, 2},
      {"sin", [](Tape& t, const Jet& a) { return jet::sin(t, a); }, [](double v) { return std::sin(v); }, -2, 2},
      {"cos", [](Tape& t, const Jet& a) { return jet::cos(t, a); }, [](double v) { return std::cos(v); }, -2, 2},
      {"exp", [](Tape& t, const Jet& a) { return jet::exp(t, a); }, [](double v) { return std::exp(v); }, -2, 2},
      {"sqrt", [](Tape& t, const Jet& a) { return jet::sqrt(t, a); }, [](double v) { return std::sqrt(v); }, 0.5, 3},
      {"pow2", [](Tape& t, const Jet& a) { return jet::pow2(t, a); }, [](double v) { return v * v; }, -2, 2},
      {"neg", [](Tape& t, const Jet& a) { return jet::neg(t, a); }, [](double v) { return -v; }, -2, 2},
      {"mul", [](Tape& t, const Jet& a) { return jet::mul(t, a, jet::cos(t, a)); },
       [](double v) { return v * std::cos(v); }, -2, 2},
      {"div", [](Tape& t, const Jet& a) { return jet::div(t, a, jet::shift(t, jet::pow2(t, a), Var{1.0})); },
       [](double v) { return v / (v * v + 1.0); }, -2, 2},
      {"sub", [](Tape& t, const Jet& a) { return jet::sub(t, a, jet::exp(t, a)); },
       [](double v) { return v - std::exp(v); }, -2, 2},
  };
  SeededRng rng(5);
  for (const auto& prim : prims) {
    const std::string name = prim.name;
    CAPTURE(name);
    for (int trial = 0; trial < 100; ++trial) {
      const double x = prim.lo + (prim.hi - prim.lo) * rng.uniform();
      Tape tape;
      const Jet j = prim.jet_fn(tape, inner_jet(tape, Jet::variable(tape.leaf(x), 3)));
      const auto f = [&](double s) { return prim.scalar(inner_scalar(s)); };
      for (int k = 1; k <= 3; ++k) {
        const double fd = oracle::derivative(f, x, k, 5e-3);
        if (std::abs(fd) < 1e-3) {
          CHECK(std::abs(j.derivative(k) - fd) <= 1e-6);
        } else {
          CHECK(oracle::rel_err(j.derivative(k), fd) <= 1e-5);
        }
      }
    }
  }
}

TEST_CASE("jets of constants and the Leibniz rule") {
  Tape tape;
  const Jet c = Jet::constant(2.5, 3);
  for (int k = 1; k <= 3; ++k) CHECK(c[k].value == 0.0);
  Jet a = Jet::constant(0.0, 3);
  Jet b = Jet::constant(0.0, 3);
  const std::array<double, 4> av{1.0, 0.5, -0.25, 2.0};
  const std::array<double, 4> bv{-1.0, 3.0, 0.75, 0.5};
  for (int k = 0; k <= 3; ++k) {
    a[k] = tape.leaf(av[k]);
    b[k] = tape.leaf(bv[k]);
  }
  const Jet p = jet::mul(tape, a, b);
  for (int k = 0; k <= 3; ++k) {
    double conv = 0.0;
    for (int j = 0; j <= k; ++j) conv += av[j] * bv[k - j];
    CHECK(p[k].value == doctest::Approx(conv).epsilon(1e-15));
  }
}

TEST_CASE("jet_eval seeds one direction and rejects primitives without jet rules") {
  Tape tape;
  const std::array<Var, 2> point{tape.leaf(0.4), tape.leaf(1.3)};
  const JetFunction f = [](Tape& t, std::span<const Jet> in) { return jet::mul(t, in[0], jet::sin(t, in[1])); };
  const Jet along_y = jet_eval(tape, f, point, 1, 2);
  CHECK(along_y[1].value == doctest::Approx(0.4 * std::cos(1.3)));
  CHECK(along_y[2].value == doctest::Approx(-0.4 * std::sin(1.3) / 2.0));
  CHECK_THROWS_AS(jet::apply(tape, Op::kLinComb, along_y), UnimplementedError);
  CHECK_THROWS_AS(jet::apply(tape, Op::kLeaf, along_y), UnimplementedError);
}

TEST_CASE("mixed mode: parameter gradient of a jet coefficient matches finite differences") {
  const MLPParams p = oracle::net(1, 2, 5, 3);
  const std::array<double, 1> x{0.9};
  const double t = 0.35;
  for (int order = 1; order <= 3; ++order) {
    Tape tape;
    const ParamVars theta = bind_params(tape, p);
    const Jet j = forward_jet(tape, p, theta, x, t, 0, order);
    const auto g = gather_adjoints(tape.backward(j[order]), theta);
    const auto fd = oracle::fd_gradient(p, [&](const MLPParams& q) {
      Tape tp;
      return forward_jet(tp, q, constant_params(q), x, t, 0, order)[order].value;
    });
    CHECK(oracle::scaled_max_err(g, fd) <= 1e-5);
  }
}

TEST_CASE("tape node count of one residual evaluation is pinned for a fixed config") {
  const PDEProblem problem = make_problem("kdv1d");
  const MLPParams p = oracle::net(1, 2, 4, 0);
  Tape tape;
  const ParamVars theta = bind_params(tape, p);
  const FieldEvaluator field = [&](Tape& tp, std::span<const double> x, double t, std::size_t coord, int order) {
    return forward_jet(tp, p, theta, x, t, coord, order);
  };
  const std::array<double, 1> x{0.5};
  (void)residual_full(tape, problem, field, x, 0.5);
  const std::size_t first = tape.node_count();
  Tape again;
  const ParamVars theta2 = bind_params(again, p);
  const FieldEvaluator field2 = [&](Tape& tp, std::span<const double> xx, double t, std::size_t coord, int order) {
    return forward_jet(tp, p, theta2, xx, t, coord, order);
  };
  (void)residual_full(again, problem, field2, x, 0.9);
  CHECK(again.node_count() == first);
  CHECK(first == kPinnedKdvResidualNodes);
}
