#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "cpl/tape.hpp"

namespace cpl {

inline constexpr int kMaxJetOrder = 3;

/// Truncated Taylor expansion along one input direction. Coefficients are
/// normalized: c[k] = f^(k) / k!. Every coefficient is a tape value, so
/// backward() over any of them yields its parameter gradient.
struct Jet {
  int order = 0;
  std::array<Var, kMaxJetOrder + 1> c{};

  static Jet constant(double v, int order);
  /// The seed jet of an input coordinate: (x, 1, 0, ...).
  static Jet variable(Var x, int order);

  /// Highest stored coefficient index, clamped to the storage size.
  [[nodiscard]] int top() const { return order < kMaxJetOrder ? order : kMaxJetOrder; }
  [[nodiscard]] Var operator[](int k) const { return c[k]; }
  Var& operator[](int k) { return c[k]; }
  /// f^(k)(s) = k! * c[k].
  [[nodiscard]] double derivative(int k) const;
};

namespace jet {

Jet add(Tape& tape, const Jet& a, const Jet& b);
Jet sub(Tape& tape, const Jet& a, const Jet& b);
/// Leibniz convolution (f g)_k = sum_{j<=k} f_j g_{k-j}.
Jet mul(Tape& tape, const Jet& a, const Jet& b);
Jet div(Tape& tape, const Jet& a, const Jet& b);
Jet scale(Tape& tape, const Jet& a, Var s);
/// a with `s` added to its order-0 coefficient.
Jet shift(Tape& tape, const Jet& a, Var s);
Jet neg(Tape& tape, const Jet& a);
Jet pow2(Tape& tape, const Jet& a);
Jet exp(Tape& tape, const Jet& a);
/// Via y' = (1 - y^2) z'.
Jet tanh(Tape& tape, const Jet& a);
Jet sin(Tape& tape, const Jet& a);
Jet cos(Tape& tape, const Jet& a);
Jet sqrt(Tape& tape, const Jet& a);

/// Applies a primitive to jets by opcode; throws UnimplementedError for
/// opcodes with no jet rule.
Jet apply(Tape& tape, Op op, const Jet& a, const Jet& b = Jet{});

}  // namespace jet

using JetFunction = std::function<Jet(Tape&, std::span<const Jet>)>;

/// Evaluates f at `point`, seeding coordinate `direction` as the jet variable
/// (every other coordinate held constant), to order K in {1, 2, 3}.
Jet jet_eval(Tape& tape, const JetFunction& f, std::span<const Var> point, int direction, int order);

}  // namespace cpl
