#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace cpl {

enum class Op : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kTanh,
  kSin,
  kCos,
  kExp,
  kSqrt,
  kPow2,
  kNeg,
  kLinComb,  // n-ary: c0 + sum_i a_i * b_i with a, b values or constants
};

/// A scalar value that may live on a Tape. Constants carry index -1 and
/// never create nodes.
struct Var {
  double value = 0.0;
  std::int32_t index = -1;

  constexpr Var() = default;
  constexpr Var(double v) : value(v) {}  // NOLINT(google-explicit-constructor)
  constexpr Var(double v, std::int32_t i) : value(v), index(i) {}

  [[nodiscard]] constexpr bool is_constant() const { return index < 0; }
};

/// Reverse-mode computation record. Nodes are appended in topological order;
/// each stores its incoming edges (parent index, local partial) in a flat
/// compressed layout so n-ary nodes cost one node plus one edge per parent.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// New independent variable.
  Var leaf(double value);

  /// Registers `values.size()` leaves with consecutive indices.
  std::vector<Var> leaves(std::span<const double> values);

  /// Generic primitive recorder. Binary ops use both arguments, unary ops
  /// ignore `b`. Throws DomainError for div by zero and sqrt of a negative.
  Var record(Op op, Var a, Var b = Var{});

  Var add(Var a, Var b) { return record(Op::kAdd, a, b); }
  Var sub(Var a, Var b) { return record(Op::kSub, a, b); }
  Var mul(Var a, Var b) { return record(Op::kMul, a, b); }
  Var div(Var a, Var b) { return record(Op::kDiv, a, b); }
  Var tanh(Var a) { return record(Op::kTanh, a); }
  Var sin(Var a) { return record(Op::kSin, a); }
  Var cos(Var a) { return record(Op::kCos, a); }
  Var exp(Var a) { return record(Op::kExp, a); }
  Var sqrt(Var a) { return record(Op::kSqrt, a); }
  Var pow2(Var a) { return record(Op::kPow2, a); }
  Var neg(Var a) { return record(Op::kNeg, a); }

  /// offset + sum_i a[i] * b[i], recorded as a single node.
  Var dot(Var offset, std::span<const Var> a, std::span<const Var> b);

  /// offset + sum_i w[i] * a[i] * b[i] with constant weights.
  Var dot(Var offset, std::span<const double> w, std::span<const Var> a, std::span<const Var> b);

  /// offset + sum_i w[i] * x[i] with constant weights.
  Var lincomb(double offset, std::span<const double> w, std::span<const Var> x);

  /// sum_i x[i].
  Var sum(std::span<const Var> x);

  /// Node with a prescribed value and prescribed local partials, for maps
  /// whose forward value is computed off the tape (implicit functions).
  Var linearized(double value, std::span<const Var> parents, std::span<const double> partials);

  [[nodiscard]] std::size_t node_count() const { return op_.size(); }
  [[nodiscard]] std::size_t edge_count() const { return parent_.size(); }
  [[nodiscard]] Op op(std::size_t node) const { return op_[node]; }
  [[nodiscard]] double value(std::size_t node) const { return value_[node]; }

  /// Parent indices and local partials of one node.
  [[nodiscard]] std::span<const std::int32_t> parents(std::size_t node) const;
  [[nodiscard]] std::span<const double> partials(std::size_t node) const;

  /// Reverse sweep from a single output seeded with 1. Returns the adjoint of
  /// every node (index = node index).
  [[nodiscard]] std::vector<double> backward(Var output) const;

  /// Reverse sweep seeded with several (node, weight) pairs. Constant seeds are
  /// ignored.
  [[nodiscard]] std::vector<double> backward(
      std::span<const std::pair<Var, double>> seeds) const;

  /// Drops every node; keeps allocations for reuse.
  void clear();

  /// Reserves storage for roughly `nodes` nodes with `edges` edges total.
  void reserve(std::size_t nodes, std::size_t edges);

 private:
  Var push(Op op, double value);
  void edge(Var parent, double partial);

  std::vector<Op> op_;
  std::vector<double> value_;
  std::vector<std::uint32_t> edge_begin_;  // size node_count + 1 once non-empty
  std::vector<std::int32_t> parent_;
  std::vector<double> partial_;
};

/// Gradient with respect to a contiguous block of leaves [first, first + n).
std::vector<double> gather_adjoints(std::span<const double> adjoints,
                                    std::span<const Var> leaves);

}  // namespace cpl
