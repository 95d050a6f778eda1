#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "hamassim/autodiff.hpp"
#include "hamassim/integrators.hpp"
#include "hamassim/models.hpp"
#include "hamassim/systems.hpp"

namespace hamassim::testkit {

/// Exact mass-spring flow: rotation in (q, p/(m omega)).
inline Vector oscillator_flow(const MassSpring& s, const Vector& x0, double t) {
  const double w = std::sqrt(s.k / s.m);
  const double c = std::cos(w * t);
  const double sn = std::sin(w * t);
  Vector x(2);
  x[0] = x0[0] * c + x0[1] / (s.m * w) * sn;
  x[1] = -x0[0] * s.m * w * sn + x0[1] * c;
  return x;
}

/// One RK4 step of the true field per call; stands in for a perfectly
/// trained Hamiltonian model.
class ExactFieldPredictor final : public Predictor {
 public:
  ExactFieldPredictor(SystemSpec spec, double dt, int substeps = 1) : spec_(std::move(spec)), dt_(dt), sub_(substeps) {}
  int state_dim() const override { return spec_.phase_dim(); }
  Vector step(const Vector& x) const override {
    Vector y = x;
    const auto f = [this](const Vector& z) { return systems::vector_field(spec_, z); };
    for (int i = 0; i < sub_; ++i) y = integrators::rk4_step(f, y, dt_ / sub_);
    return y;
  }

 private:
  SystemSpec spec_;
  double dt_;
  int sub_;
};

/// Exact flow of the mass-spring system as a predictor.
class ExactFlowPredictor final : public Predictor {
 public:
  ExactFlowPredictor(MassSpring s, double dt) : s_(s), dt_(dt) {}
  int state_dim() const override { return 2; }
  Vector step(const Vector& x) const override { return oscillator_flow(s_, x, dt_); }

 private:
  MassSpring s_;
  double dt_;
};

/// Random expression trees over every primitive, evaluated for double or
/// ad::Var. Domains are kept valid by construction.
class RandomProgram {
 public:
  RandomProgram(std::mt19937_64& rng, int n_inputs, int max_depth) : n_(n_inputs) {
    root_ = build(rng, max_depth);
  }

  template <class T>
  T operator()(const std::vector<T>& x) const {
    return eval<T>(*root_, x);
  }

  /// Smallest distance of a min/max argument from its constant; the finite
  /// difference check is meaningless close to a kink.
  double kink_distance(const std::vector<double>& x) const {
    double d = std::numeric_limits<double>::infinity();
    eval_kinks(*root_, x, d);
    return d;
  }

 private:
  enum class K { Input, Const, Add, Sub, Mul, Div, Neg, Pow, Sqrt, Exp, Log, Tanh, Sin, Cos, Asin, Acos, Min, Max, Square, Sum, Dot };

  struct Node {
    K kind;
    int input = 0;
    double c = 0.0;
    std::vector<std::unique_ptr<Node>> kids;
  };

  std::unique_ptr<Node> build(std::mt19937_64& rng, int depth) {
    auto node = std::make_unique<Node>();
    std::uniform_int_distribution<int> pick_op(static_cast<int>(K::Add), static_cast<int>(K::Dot));
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    if (depth == 0) {
      const bool leaf_const = std::uniform_int_distribution<int>(0, 4)(rng) == 0;
      node->kind = leaf_const ? K::Const : K::Input;
      node->input = std::uniform_int_distribution<int>(0, n_ - 1)(rng);
      node->c = u(rng);
      return node;
    }
    node->kind = static_cast<K>(pick_op(rng));
    node->c = u(rng);
    int arity = 1;
    switch (node->kind) {
      case K::Add: case K::Sub: case K::Mul: case K::Div: case K::Pow: arity = 2; break;
      case K::Sum: case K::Dot: arity = 4; break;
      default: break;
    }
    for (int i = 0; i < arity; ++i) node->kids.push_back(build(rng, depth - 1));
    return node;
  }

  template <class T>
  static T eval(const Node& n, const std::vector<T>& x) {
    using std::tanh;
    using ad::tanh;
    auto k = [&](std::size_t i) { return eval<T>(*n.kids[i], x); };
    switch (n.kind) {
      case K::Input: return x[static_cast<std::size_t>(n.input)];
      case K::Const: return T(n.c);
      case K::Add: return k(0) + k(1);
      case K::Sub: return k(0) - k(1);
      case K::Mul: return k(0) * k(1);
      case K::Div: { const T b = k(1); return k(0) / (b * b + 0.5); }
      case K::Neg: return -k(0);
      case K::Pow: { const T a = k(0); return pow_(a * a + 0.5, tanh(k(1))); }
      case K::Sqrt: { const T a = k(0); return sqrt_(a * a + 0.25); }
      case K::Exp: return exp_(tanh(k(0)));
      case K::Log: { const T a = k(0); return log_(a * a + 0.5); }
      case K::Tanh: return tanh(k(0));
      case K::Sin: return sin_(k(0));
      case K::Cos: return cos_(k(0));
      case K::Asin: return asin_(0.9 * tanh(k(0)));
      case K::Acos: return acos_(0.9 * tanh(k(0)));
      case K::Min: return min_(k(0), n.c);
      case K::Max: return max_(k(0), n.c);
      case K::Square: return square_(k(0));
      case K::Sum: {
        std::vector<T> v{k(0), k(1), k(2), k(3)};
        return sum_(v);
      }
      case K::Dot: {
        std::vector<T> a{k(0), k(1)};
        std::vector<T> b{k(2), k(3)};
        return dot_(a, b);
      }
    }
    return T(0.0);
  }

  static void eval_kinks(const Node& n, const std::vector<double>& x, double& d) {
    for (const auto& c : n.kids) eval_kinks(*c, x, d);
    if (n.kind == K::Min || n.kind == K::Max) d = std::min(d, std::abs(eval<double>(*n.kids[0], x) - n.c));
  }

  static double pow_(double a, double b) { return std::pow(a, b); }
  static double sqrt_(double a) { return std::sqrt(a); }
  static double exp_(double a) { return std::exp(a); }
  static double log_(double a) { return std::log(a); }
  static double sin_(double a) { return std::sin(a); }
  static double cos_(double a) { return std::cos(a); }
  static double asin_(double a) { return std::asin(a); }
  static double acos_(double a) { return std::acos(a); }
  static double min_(double a, double c) { return std::min(a, c); }
  static double max_(double a, double c) { return std::max(a, c); }
  static double square_(double a) { return a * a; }
  static double sum_(const std::vector<double>& v) { return v[0] + v[1] + v[2] + v[3]; }
  static double dot_(const std::vector<double>& a, const std::vector<double>& b) { return a[0] * b[0] + a[1] * b[1]; }

  static ad::Var pow_(const ad::Var& a, const ad::Var& b) { return ad::pow(a, b); }
  static ad::Var sqrt_(const ad::Var& a) { return ad::sqrt(a); }
  static ad::Var exp_(const ad::Var& a) { return ad::exp(a); }
  static ad::Var log_(const ad::Var& a) { return ad::log(a); }
  static ad::Var sin_(const ad::Var& a) { return ad::sin(a); }
  static ad::Var cos_(const ad::Var& a) { return ad::cos(a); }
  static ad::Var asin_(const ad::Var& a) { return ad::asin(a); }
  static ad::Var acos_(const ad::Var& a) { return ad::acos(a); }
  static ad::Var min_(const ad::Var& a, double c) { return ad::min(a, c); }
  static ad::Var max_(const ad::Var& a, double c) { return ad::max(a, c); }
  static ad::Var square_(const ad::Var& a) { return ad::square(a); }
  static ad::Var sum_(const std::vector<ad::Var>& v) { return ad::sum(v); }
  static ad::Var dot_(const std::vector<ad::Var>& a, const std::vector<ad::Var>& b) { return ad::dot(a, b); }

  int n_;
  std::unique_ptr<Node> root_;
};

struct GradientCheck {
  bool ok = true;
  double worst_abs = 0.0;
  double worst_rel = 0.0;
};

/// Reverse-mode gradient of a random program against central differences.
inline GradientCheck check_program(const RandomProgram& prog, const std::vector<double>& x, double h = 1e-6) {
  const Vector xv = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
  const ad::Recording rec = ad::record(
      [&](std::span<const ad::Var> in) { return prog(std::vector<ad::Var>(in.begin(), in.end())); }, xv);
  const Vector g = ad::backward(rec);
  GradientCheck out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::vector<double> xp = x;
    std::vector<double> xm = x;
    const double step = h * std::max(1.0, std::abs(x[i]));
    xp[i] += step;
    xm[i] -= step;
    const double fd = (prog(xp) - prog(xm)) / (2.0 * step);
    const double abs_err = std::abs(g[static_cast<Eigen::Index>(i)] - fd);
    const double rel_err = abs_err / std::max(std::abs(fd), 1e-300);
    out.worst_abs = std::max(out.worst_abs, abs_err);
    if (abs_err > 1e-9) out.worst_rel = std::max(out.worst_rel, rel_err);
    if (abs_err > 1e-9 && rel_err > 1e-6) out.ok = false;
  }
  return out;
}

}  // namespace hamassim::testkit
