#include "hamassim/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hamassim::ad {
namespace {

constexpr double kArcClamp = 1.0 - 1e-12;

Tape* common_tape(const Var& a, const Var& b) {
  Tape* t = a.tape() != nullptr ? a.tape() : b.tape();
  if (a.tape() != nullptr && b.tape() != nullptr && a.tape() != b.tape()) {
    fail(ErrorCode::InvalidArgument, "operands recorded on different tapes");
  }
  return t;
}

double clamp_unit(double x) { return std::clamp(x, -kArcClamp, kArcClamp); }

double eval_unary(Op op, double a, double aux) {
  switch (op) {
    case Op::Neg: return -a;
    case Op::Sqrt: return std::sqrt(a);
    case Op::Exp: return std::exp(a);
    case Op::Log: return std::log(a);
    case Op::Tanh: return std::tanh(a);
    case Op::Sin: return std::sin(a);
    case Op::Cos: return std::cos(a);
    case Op::Asin: return std::asin(clamp_unit(a));
    case Op::Acos: return std::acos(clamp_unit(a));
    case Op::MinConst: return std::min(a, aux);
    case Op::MaxConst: return std::max(a, aux);
    case Op::Square: return a * a;
    default: break;
  }
  fail(ErrorCode::UnsupportedPrimitive, "not a unary primitive");
}

double eval_binary(Op op, double a, double b) {
  switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div: return a / b;
    case Op::Pow: return std::pow(a, b);
    default: break;
  }
  fail(ErrorCode::UnsupportedPrimitive, "not a binary primitive");
}

bool is_binary(Op op) {
  return op == Op::Add || op == Op::Sub || op == Op::Mul || op == Op::Div || op == Op::Pow;
}

// Unary op on a recorded var: value and local derivative.
Var unary(Op op, const Var& a, double aux = 0.0) {
  const double x = a.value();
  const double v = eval_unary(op, x, aux);
  if (a.is_constant()) return Var(v);
  double d = 0.0;
  switch (op) {
    case Op::Neg: d = -1.0; break;
    case Op::Sqrt: d = 0.5 / v; break;
    case Op::Exp: d = v; break;
    case Op::Log: d = 1.0 / x; break;
    case Op::Tanh: d = 1.0 - v * v; break;
    case Op::Sin: d = std::cos(x); break;
    case Op::Cos: d = -std::sin(x); break;
    case Op::Asin: {
      const double c = clamp_unit(x);
      d = 1.0 / std::sqrt(1.0 - c * c);
      break;
    }
    case Op::Acos: {
      const double c = clamp_unit(x);
      d = -1.0 / std::sqrt(1.0 - c * c);
      break;
    }
    case Op::MinConst: d = x < aux ? 1.0 : 0.0; break;
    case Op::MaxConst: d = x > aux ? 1.0 : 0.0; break;
    case Op::Square: d = 2.0 * x; break;
    default: fail(ErrorCode::UnsupportedPrimitive, "not a unary primitive");
  }
  return a.tape()->push(op, v, a, d, Var(), 0.0, aux);
}

Var binary(Op op, const Var& a, const Var& b) {
  const double x = a.value();
  const double y = b.value();
  const double v = eval_binary(op, x, y);
  Tape* tape = common_tape(a, b);
  if (tape == nullptr) return Var(v);
  double da = 0.0;
  double db = 0.0;
  switch (op) {
    case Op::Add: da = 1.0; db = 1.0; break;
    case Op::Sub: da = 1.0; db = -1.0; break;
    case Op::Mul: da = y; db = x; break;
    case Op::Div: da = 1.0 / y; db = -x / (y * y); break;
    case Op::Pow:
      da = y * std::pow(x, y - 1.0);
      db = b.is_constant() ? 0.0 : v * std::log(x);
      break;
    default: fail(ErrorCode::UnsupportedPrimitive, "not a binary primitive");
  }
  // The constant operand, if any, is kept in aux so the node can be replayed.
  const double aux = a.is_constant() ? x : (b.is_constant() ? y : 0.0);
  return tape->push(op, v, a, da, b, db, aux);
}

}  // namespace

Var Tape::input(double value) {
  Var v = push(Op::Input, value, Var(), 0.0);
  inputs_.push_back(v.index());
  return v;
}

Var Tape::push(Op op, double value, const Var& a, double da, const Var& b, double db, double aux) {
  const auto index = static_cast<std::int32_t>(nodes_.size());
  if (!std::isfinite(value) || !std::isfinite(da) || !std::isfinite(db)) {
    fail(ErrorCode::NonFiniteValue, "node " + std::to_string(index) + " evaluated to a non-finite value");
  }
  nodes_.push_back(Node{op, {a.index(), b.index()}, {da, db}, value, aux});
  return Var(this, index, value);
}

std::vector<double> Tape::adjoints(const Var& output) const {
  std::vector<double> adj(nodes_.size(), 0.0);
  if (output.is_constant()) return adj;
  if (output.tape() != this) fail(ErrorCode::InvalidArgument, "output was not recorded on this tape");
  adj[static_cast<std::size_t>(output.index())] = 1.0;
  for (auto i = static_cast<std::int64_t>(output.index()); i >= 0; --i) {
    const double a = adj[static_cast<std::size_t>(i)];
    if (a == 0.0) continue;
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.parent[0] >= 0) adj[static_cast<std::size_t>(n.parent[0])] += a * n.partial[0];
    if (n.parent[1] >= 0) adj[static_cast<std::size_t>(n.parent[1])] += a * n.partial[1];
  }
  return adj;
}

Vector Tape::gradient(const Var& output) const {
  const std::vector<double> adj = adjoints(output);
  Vector g(static_cast<Eigen::Index>(inputs_.size()));
  for (std::size_t i = 0; i < inputs_.size(); ++i) {
    g[static_cast<Eigen::Index>(i)] = adj[static_cast<std::size_t>(inputs_[i])];
  }
  return g;
}

Vector Tape::gradient(const Var& output, std::span<const Var> wrt) const {
  const std::vector<double> adj = adjoints(output);
  Vector g = Vector::Zero(static_cast<Eigen::Index>(wrt.size()));
  for (std::size_t i = 0; i < wrt.size(); ++i) {
    if (!wrt[i].is_constant()) g[static_cast<Eigen::Index>(i)] = adj[static_cast<std::size_t>(wrt[i].index())];
  }
  return g;
}

void Tape::clear() {
  nodes_.clear();
  inputs_.clear();
}

std::vector<double> Tape::replay() const {
  std::vector<double> values(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.op == Op::Input) {
      values[i] = n.value;
      continue;
    }
    const double a = n.parent[0] >= 0 ? values[static_cast<std::size_t>(n.parent[0])] : n.aux;
    if (is_binary(n.op)) {
      const double b = n.parent[1] >= 0 ? values[static_cast<std::size_t>(n.parent[1])] : n.aux;
      values[i] = eval_binary(n.op, a, b);
    } else {
      values[i] = eval_unary(n.op, a, n.aux);
    }
  }
  return values;
}

Var operator+(const Var& a, const Var& b) { return binary(Op::Add, a, b); }
Var operator-(const Var& a, const Var& b) { return binary(Op::Sub, a, b); }
Var operator*(const Var& a, const Var& b) { return binary(Op::Mul, a, b); }
Var operator/(const Var& a, const Var& b) { return binary(Op::Div, a, b); }
Var operator-(const Var& a) { return unary(Op::Neg, a); }
Var& operator+=(Var& a, const Var& b) { return a = a + b; }
Var& operator-=(Var& a, const Var& b) { return a = a - b; }
Var& operator*=(Var& a, const Var& b) { return a = a * b; }
Var& operator/=(Var& a, const Var& b) { return a = a / b; }

Var pow(const Var& a, const Var& b) { return binary(Op::Pow, a, b); }
Var sqrt(const Var& a) { return unary(Op::Sqrt, a); }
Var exp(const Var& a) { return unary(Op::Exp, a); }
Var log(const Var& a) { return unary(Op::Log, a); }
Var tanh(const Var& a) { return unary(Op::Tanh, a); }
Var sin(const Var& a) { return unary(Op::Sin, a); }
Var cos(const Var& a) { return unary(Op::Cos, a); }
Var asin(const Var& a) { return unary(Op::Asin, a); }
Var acos(const Var& a) { return unary(Op::Acos, a); }
Var square(const Var& a) { return unary(Op::Square, a); }
Var min(const Var& a, double c) { return unary(Op::MinConst, a, c); }
Var max(const Var& a, double c) { return unary(Op::MaxConst, a, c); }

Var sum(std::span<const Var> xs) {
  Var acc(0.0);
  for (const Var& x : xs) acc = acc + x;
  return acc;
}

Var dot(std::span<const Var> a, std::span<const Var> b) {
  if (a.size() != b.size()) fail(ErrorCode::DimensionMismatch, "dot: operand lengths differ");
  Var acc(0.0);
  for (std::size_t i = 0; i < a.size(); ++i) acc = acc + a[i] * b[i];
  return acc;
}

Var apply_unary(Op op, const Var& a) {
  if (op == Op::MinConst || op == Op::MaxConst) {
    fail(ErrorCode::UnsupportedPrimitive, "min/max need a constant bound; call min()/max()");
  }
  return unary(op, a);
}

Var apply_binary(Op op, const Var& a, const Var& b) {
  if (!is_binary(op)) fail(ErrorCode::UnsupportedPrimitive, "not a binary primitive");
  return binary(op, a, b);
}

Vector backward(const Recording& rec) {
  if (rec.outputs.size() != 1) {
    fail(ErrorCode::ScalarRequired,
         "backward needs a scalar output, program has " + std::to_string(rec.outputs.size()));
  }
  return rec.tape->gradient(rec.outputs.front());
}

}  // namespace hamassim::ad
