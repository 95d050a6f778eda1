#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "hamassim/linalg.hpp"

// Reverse-mode automatic differentiation over a dynamically recorded tape.
//
// Each node stores at most two parents together with the local partial
// derivatives evaluated at record time, so the backward sweep is a single
// reverse pass over the node list. Constants are not recorded; a Var with
// index -1 carries a plain value.
namespace hamassim::ad {

enum class Op : std::uint8_t {
  Input,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Pow,
  Sqrt,
  Exp,
  Log,
  Tanh,
  Sin,
  Cos,
  Asin,
  Acos,
  MinConst,
  MaxConst,
  Square,
};

class Tape;

class Var {
 public:
  Var() = default;
  Var(double constant) : value_(constant) {}  // NOLINT(google-explicit-constructor)

  double value() const noexcept { return value_; }
  std::int32_t index() const noexcept { return index_; }
  Tape* tape() const noexcept { return tape_; }
  bool is_constant() const noexcept { return index_ < 0; }

 private:
  friend class Tape;
  Var(Tape* tape, std::int32_t index, double value) : tape_(tape), index_(index), value_(value) {}

  Tape* tape_ = nullptr;
  std::int32_t index_ = -1;
  double value_ = 0.0;
};

class Tape {
 public:
  struct Node {
    Op op;
    std::int32_t parent[2];
    double partial[2];
    double value;
    double aux;  // constant operand of a mixed binary op, or the clamp bound
  };

  /// Records a designated input leaf; gradient() reports derivatives in the
  /// order inputs were created.
  Var input(double value);

  /// Appends a node. Parents with index -1 are ignored. Throws NonFiniteValue
  /// when the value or a partial is not finite.
  Var push(Op op, double value, const Var& a, double da, const Var& b = Var(), double db = 0.0,
           double aux = 0.0);

  /// Adjoint of every node for a scalar output.
  std::vector<double> adjoints(const Var& output) const;

  /// d output / d input for every designated input.
  Vector gradient(const Var& output) const;

  /// d output / d v for selected vars (inputs or intermediate nodes).
  Vector gradient(const Var& output, std::span<const Var> wrt) const;

  void clear();
  void reserve(std::size_t nodes) { nodes_.reserve(nodes); }

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  std::span<const std::int32_t> inputs() const noexcept { return inputs_; }

  /// Recomputes every node value from the recorded ops and input values.
  std::vector<double> replay() const;

 private:
  std::vector<Node> nodes_;
  std::vector<std::int32_t> inputs_;
};

// Arithmetic. Mixed Var/double operands go through the implicit constant
// conversion.
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var& operator+=(Var& a, const Var& b);
Var& operator-=(Var& a, const Var& b);
Var& operator*=(Var& a, const Var& b);
Var& operator/=(Var& a, const Var& b);

Var pow(const Var& a, const Var& b);
Var sqrt(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var sin(const Var& a);
Var cos(const Var& a);
Var asin(const Var& a);
Var acos(const Var& a);
Var square(const Var& a);
Var min(const Var& a, double c);
Var max(const Var& a, double c);
Var sum(std::span<const Var> xs);
Var dot(std::span<const Var> a, std::span<const Var> b);

/// Dispatch by op kind. Throws UnsupportedPrimitive for kinds that are not
/// unary (respectively binary) primitives.
Var apply_unary(Op op, const Var& a);
Var apply_binary(Op op, const Var& a, const Var& b);

/// Result of recording a program on a fresh tape.
struct Recording {
  std::unique_ptr<Tape> tape;
  std::vector<Var> inputs;
  std::vector<Var> outputs;
};

/// Records f(inputs) where f maps std::span<const Var> to a Var or to a
/// std::vector<Var>.
template <class F>
Recording record(F&& f, const Vector& inputs) {
  Recording rec;
  rec.tape = std::make_unique<Tape>();
  rec.inputs.reserve(static_cast<std::size_t>(inputs.size()));
  for (Eigen::Index i = 0; i < inputs.size(); ++i) rec.inputs.push_back(rec.tape->input(inputs[i]));
  auto out = f(std::span<const Var>(rec.inputs));
  if constexpr (std::is_same_v<std::decay_t<decltype(out)>, Var>) {
    rec.outputs.push_back(out);
  } else {
    rec.outputs.assign(out.begin(), out.end());
  }
  return rec;
}

/// Gradient of the single recorded output with respect to the recorded
/// inputs. Throws ScalarRequired when the program has more than one output.
Vector backward(const Recording& rec);

}  // namespace hamassim::ad
