#include "cpl/jet.hpp"

#include <cmath>
#include <string>

#include "cpl/errors.hpp"

namespace cpl {

namespace {

constexpr std::array<double, kMaxJetOrder + 1> kFactorial{1.0, 1.0, 2.0, 6.0};

void check_order(int order) {
  if (order < 0 || order > kMaxJetOrder) {
    throw UnimplementedError("jet order " + std::to_string(order) + " unsupported (max 3)");
  }
}

int common_order(const Jet& a, const Jet& b) { return std::min(a.order, b.order); }

// sum_{j=1..k} (j/k) * z_j * s_{k-j}: the shared shape of every ODE-driven
// recurrence (exp, tanh, sin, cos).
Var recurrence_term(Tape& tape, const Jet& z, const Jet& s, int k, double sign) {
  std::array<double, kMaxJetOrder> w{};
  std::array<Var, kMaxJetOrder> a{};
  std::array<Var, kMaxJetOrder> b{};
  for (int j = 1; j <= k; ++j) {
    w[j - 1] = sign * static_cast<double>(j) / static_cast<double>(k);
    a[j - 1] = z[j];
    b[j - 1] = s[k - j];
  }
  const auto n = static_cast<std::size_t>(k);
  return tape.dot(Var{0.0}, std::span(w.data(), n), std::span(a.data(), n), std::span(b.data(), n));
}

}  // namespace

Jet Jet::constant(double v, int order) {
  check_order(order);
  Jet j;
  j.order = order;
  j.c[0] = Var{v};
  return j;
}

Jet Jet::variable(Var x, int order) {
  check_order(order);
  Jet j;
  j.order = order;
  j.c[0] = x;
  if (order >= 1) j.c[1] = Var{1.0};
  return j;
}

double Jet::derivative(int k) const { return kFactorial[k] * c[k].value; }

namespace jet {

Jet add(Tape& tape, const Jet& a, const Jet& b) {
  Jet r;
  r.order = common_order(a, b);
  for (int k = 0; k <= r.top(); ++k) r[k] = tape.add(a[k], b[k]);
  return r;
}

Jet sub(Tape& tape, const Jet& a, const Jet& b) {
  Jet r;
  r.order = common_order(a, b);
  for (int k = 0; k <= r.top(); ++k) r[k] = tape.sub(a[k], b[k]);
  return r;
}

Jet mul(Tape& tape, const Jet& a, const Jet& b) {
  Jet r;
  r.order = common_order(a, b);
  for (int k = 0; k <= r.top(); ++k) {
    std::array<Var, kMaxJetOrder + 1> x{};
    std::array<Var, kMaxJetOrder + 1> y{};
    for (int j = 0; j <= k; ++j) {
      x[j] = a[j];
      y[j] = b[k - j];
    }
    const auto n = static_cast<std::size_t>(k + 1);
    r[k] = tape.dot(Var{0.0}, std::span(x.data(), n), std::span(y.data(), n));
  }
  return r;
}

Jet div(Tape& tape, const Jet& a, const Jet& b) {
  if (b[0].value == 0.0) throw DomainError("jet div: zero denominator");
  Jet q;
  q.order = common_order(a, b);
  for (int k = 0; k <= q.top(); ++k) {
    std::array<double, kMaxJetOrder> w{};
    std::array<Var, kMaxJetOrder> x{};
    std::array<Var, kMaxJetOrder> y{};
    for (int j = 1; j <= k; ++j) {
      w[j - 1] = -1.0;
      x[j - 1] = b[j];
      y[j - 1] = q[k - j];
    }
    const auto n = static_cast<std::size_t>(k);
    Var num = k == 0 ? a[0]
                     : tape.dot(a[k], std::span(w.data(), n), std::span(x.data(), n),
                                std::span(y.data(), n));
    q[k] = tape.div(num, b[0]);
  }
  return q;
}

Jet scale(Tape& tape, const Jet& a, Var s) {
  Jet r;
  r.order = a.order;
  for (int k = 0; k <= r.top(); ++k) r[k] = tape.mul(s, a[k]);
  return r;
}

Jet shift(Tape& tape, const Jet& a, Var s) {
  Jet r = a;
  r[0] = tape.add(a[0], s);
  return r;
}

Jet neg(Tape& tape, const Jet& a) {
  Jet r;
  r.order = a.order;
  for (int k = 0; k <= r.top(); ++k) r[k] = tape.neg(a[k]);
  return r;
}

Jet pow2(Tape& tape, const Jet& a) { return mul(tape, a, a); }

Jet exp(Tape& tape, const Jet& z) {
  Jet y;
  y.order = z.order;
  y[0] = tape.exp(z[0]);
  for (int k = 1; k <= y.top(); ++k) y[k] = recurrence_term(tape, z, y, k, 1.0);
  return y;
}

Jet tanh(Tape& tape, const Jet& z) {
  Jet y;
  Jet s;  // 1 - y^2
  y.order = z.order;
  s.order = z.order;
  y[0] = tape.tanh(z[0]);
  {
    const double w = -1.0;
    s[0] = tape.dot(Var{1.0}, std::span(&w, 1), std::span(&y[0], 1), std::span(&y[0], 1));
  }
  for (int k = 1; k <= y.top(); ++k) {
    y[k] = recurrence_term(tape, z, s, k, 1.0);
    std::array<double, kMaxJetOrder + 1> w{};
    std::array<Var, kMaxJetOrder + 1> a{};
    std::array<Var, kMaxJetOrder + 1> b{};
    for (int j = 0; j <= k; ++j) {
      w[j] = -1.0;
      a[j] = y[j];
      b[j] = y[k - j];
    }
    const auto n = static_cast<std::size_t>(k + 1);
    s[k] = tape.dot(Var{0.0}, std::span(w.data(), n), std::span(a.data(), n), std::span(b.data(), n));
  }
  return y;
}

namespace {

std::pair<Jet, Jet> sin_cos(Tape& tape, const Jet& z) {
  Jet s;
  Jet c;
  s.order = z.order;
  c.order = z.order;
  s[0] = tape.sin(z[0]);
  c[0] = tape.cos(z[0]);
  for (int k = 1; k <= z.top(); ++k) {
    s[k] = recurrence_term(tape, z, c, k, 1.0);
    c[k] = recurrence_term(tape, z, s, k, -1.0);
  }
  return {s, c};
}

}  // namespace

Jet sin(Tape& tape, const Jet& z) { return sin_cos(tape, z).first; }

Jet cos(Tape& tape, const Jet& z) { return sin_cos(tape, z).second; }

Jet sqrt(Tape& tape, const Jet& z) {
  Jet y;
  y.order = z.order;
  y[0] = tape.sqrt(z[0]);
  if (y.order > 0 && y[0].value == 0.0) throw DomainError("jet sqrt: derivative undefined at 0");
  const Var two_y0 = tape.mul(Var{2.0}, y[0]);
  for (int k = 1; k <= y.top(); ++k) {
    std::array<double, kMaxJetOrder> w{};
    std::array<Var, kMaxJetOrder> a{};
    std::array<Var, kMaxJetOrder> b{};
    for (int j = 1; j < k; ++j) {
      w[j - 1] = -1.0;
      a[j - 1] = y[j];
      b[j - 1] = y[k - j];
    }
    const auto n = static_cast<std::size_t>(k - 1);
    Var num = tape.dot(z[k], std::span(w.data(), n), std::span(a.data(), n), std::span(b.data(), n));
    y[k] = tape.div(num, two_y0);
  }
  return y;
}

Jet apply(Tape& tape, Op op, const Jet& a, const Jet& b) {
  switch (op) {
    case Op::kAdd:
      return add(tape, a, b);
    case Op::kSub:
      return sub(tape, a, b);
    case Op::kMul:
      return mul(tape, a, b);
    case Op::kDiv:
      return div(tape, a, b);
    case Op::kTanh:
      return tanh(tape, a);
    case Op::kSin:
      return sin(tape, a);
    case Op::kCos:
      return cos(tape, a);
    case Op::kExp:
      return exp(tape, a);
    case Op::kSqrt:
      return sqrt(tape, a);
    case Op::kPow2:
      return pow2(tape, a);
    case Op::kNeg:
      return neg(tape, a);
    case Op::kLeaf:
    case Op::kLinComb:
      break;
  }
  throw UnimplementedError("no jet rule for this opcode");
}

}  // namespace jet

Jet jet_eval(Tape& tape, const JetFunction& f, std::span<const Var> point, int direction, int order) {
  if (order < 1 || order > kMaxJetOrder) {
    throw UnimplementedError("jet_eval: order must be in {1,2,3}");
  }
  if (direction < 0 || static_cast<std::size_t>(direction) >= point.size()) {
    throw InputError("jet_eval: direction out of range");
  }
  std::vector<Jet> inputs;
  inputs.reserve(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    inputs.push_back(static_cast<int>(i) == direction ? Jet::variable(point[i], order)
                                                      : Jet::constant(0.0, order));
    if (static_cast<int>(i) != direction) inputs.back()[0] = point[i];
  }
  return f(tape, inputs);
}

}  // namespace cpl
