#include "cpl/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cpl/errors.hpp"

namespace cpl {

Var Tape::push(Op op, double value) {
  if (edge_begin_.empty()) edge_begin_.push_back(0);
  op_.push_back(op);
  value_.push_back(value);
  edge_begin_.push_back(static_cast<std::uint32_t>(parent_.size()));
  return Var{value, static_cast<std::int32_t>(op_.size() - 1)};
}

void Tape::edge(Var parent, double partial) {
  // zero partials contribute nothing to any adjoint
  if (parent.is_constant() || partial == 0.0) return;
  parent_.push_back(parent.index);
  partial_.push_back(partial);
  edge_begin_.back() = static_cast<std::uint32_t>(parent_.size());
}

Var Tape::leaf(double value) { return push(Op::kLeaf, value); }

std::vector<Var> Tape::leaves(std::span<const double> values) {
  std::vector<Var> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(leaf(v));
  return out;
}

Var Tape::record(Op op, Var a, Var b) {
  double v = 0.0;
  double da = 0.0;
  double db = 0.0;
  bool binary = false;
  switch (op) {
    case Op::kAdd:
      v = a.value + b.value;
      da = 1.0;
      db = 1.0;
      binary = true;
      break;
    case Op::kSub:
      v = a.value - b.value;
      da = 1.0;
      db = -1.0;
      binary = true;
      break;
    case Op::kMul:
      v = a.value * b.value;
      da = b.value;
      db = a.value;
      binary = true;
      break;
    case Op::kDiv:
      if (b.value == 0.0) throw DomainError("div: division by zero");
      v = a.value / b.value;
      da = 1.0 / b.value;
      db = -v / b.value;
      binary = true;
      break;
    case Op::kTanh:
      v = std::tanh(a.value);
      da = 1.0 - v * v;
      break;
    case Op::kSin:
      v = std::sin(a.value);
      da = std::cos(a.value);
      break;
    case Op::kCos:
      v = std::cos(a.value);
      da = -std::sin(a.value);
      break;
    case Op::kExp:
      v = std::exp(a.value);
      da = v;
      break;
    case Op::kSqrt:
      if (a.value < 0.0) throw DomainError("sqrt: negative argument " + std::to_string(a.value));
      v = std::sqrt(a.value);
      // d/dx sqrt at 0 is unbounded; report inf so misuse surfaces in finite checks
      da = v > 0.0 ? 0.5 / v : HUGE_VAL;
      break;
    case Op::kPow2:
      v = a.value * a.value;
      da = 2.0 * a.value;
      break;
    case Op::kNeg:
      v = -a.value;
      da = -1.0;
      break;
    case Op::kLeaf:
    case Op::kLinComb:
      throw UnimplementedError("record: leaf/lincomb have dedicated entry points");
  }
  const bool a_const = a.is_constant();
  const bool b_const = !binary || b.is_constant();
  if (a_const && b_const) return Var{v};
  Var out = push(op, v);
  edge(a, da);
  if (binary) edge(b, db);
  return out;
}

Var Tape::dot(Var offset, std::span<const Var> a, std::span<const Var> b) {
  double v = offset.value;
  bool any = !offset.is_constant();
  for (std::size_t i = 0; i < a.size(); ++i) {
    v += a[i].value * b[i].value;
    any = any || !a[i].is_constant() || !b[i].is_constant();
  }
  if (!any) return Var{v};
  Var out = push(Op::kLinComb, v);
  edge(offset, 1.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    edge(a[i], b[i].value);
    edge(b[i], a[i].value);
  }
  return out;
}

Var Tape::dot(Var offset, std::span<const double> w, std::span<const Var> a,
              std::span<const Var> b) {
  double v = offset.value;
  bool any = !offset.is_constant();
  for (std::size_t i = 0; i < a.size(); ++i) {
    v += w[i] * a[i].value * b[i].value;
    any = any || !a[i].is_constant() || !b[i].is_constant();
  }
  if (!any) return Var{v};
  Var out = push(Op::kLinComb, v);
  edge(offset, 1.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    edge(a[i], w[i] * b[i].value);
    edge(b[i], w[i] * a[i].value);
  }
  return out;
}

Var Tape::lincomb(double offset, std::span<const double> w, std::span<const Var> x) {
  double v = offset;
  bool any = false;
  for (std::size_t i = 0; i < w.size(); ++i) {
    v += w[i] * x[i].value;
    any = any || !x[i].is_constant();
  }
  if (!any) return Var{v};
  Var out = push(Op::kLinComb, v);
  for (std::size_t i = 0; i < w.size(); ++i) edge(x[i], w[i]);
  return out;
}

Var Tape::sum(std::span<const Var> x) {
  double v = 0.0;
  bool any = false;
  for (const Var& xi : x) {
    v += xi.value;
    any = any || !xi.is_constant();
  }
  if (!any) return Var{v};
  Var out = push(Op::kLinComb, v);
  for (const Var& xi : x) edge(xi, 1.0);
  return out;
}

Var Tape::linearized(double value, std::span<const Var> parents, std::span<const double> partials) {
  if (parents.size() != partials.size()) throw InputError("linearized: parent/partial length mismatch");
  bool any = false;
  for (const Var& p : parents) any = any || !p.is_constant();
  if (!any) return Var{value};
  Var out = push(Op::kLinComb, value);
  for (std::size_t i = 0; i < parents.size(); ++i) edge(parents[i], partials[i]);
  return out;
}

std::span<const std::int32_t> Tape::parents(std::size_t node) const {
  return {parent_.data() + edge_begin_[node], edge_begin_[node + 1] - edge_begin_[node]};
}

std::span<const double> Tape::partials(std::size_t node) const {
  return {partial_.data() + edge_begin_[node], edge_begin_[node + 1] - edge_begin_[node]};
}

std::vector<double> Tape::backward(Var output) const {
  const std::pair<Var, double> seed{output, 1.0};
  return backward(std::span<const std::pair<Var, double>>(&seed, 1));
}

std::vector<double> Tape::backward(std::span<const std::pair<Var, double>> seeds) const {
  std::vector<double> adj(op_.size(), 0.0);
  std::int64_t top = -1;
  for (const auto& [var, w] : seeds) {
    if (var.is_constant()) continue;
    adj[var.index] += w;
    top = std::max<std::int64_t>(top, var.index);
  }
  for (std::int64_t n = top; n >= 0; --n) {
    const double a = adj[n];
    if (a == 0.0) continue;
    const std::uint32_t end = edge_begin_[n + 1];
    for (std::uint32_t e = edge_begin_[n]; e < end; ++e) adj[parent_[e]] += a * partial_[e];
  }
  return adj;
}

void Tape::clear() {
  op_.clear();
  value_.clear();
  edge_begin_.clear();
  parent_.clear();
  partial_.clear();
}

void Tape::reserve(std::size_t nodes, std::size_t edges) {
  op_.reserve(nodes);
  value_.reserve(nodes);
  edge_begin_.reserve(nodes + 1);
  parent_.reserve(edges);
  partial_.reserve(edges);
}

std::vector<double> gather_adjoints(std::span<const double> adjoints, std::span<const Var> leaves) {
  std::vector<double> g(leaves.size(), 0.0);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (!leaves[i].is_constant()) g[i] = adjoints[leaves[i].index];
  }
  return g;
}

}  // namespace cpl
