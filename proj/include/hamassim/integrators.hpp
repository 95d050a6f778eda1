#pragma once

#include <functional>
#include <span>
#include <vector>

#include "hamassim/linalg.hpp"
#include "hamassim/systems.hpp"

namespace hamassim {

/// x -> dx/dt.
using Field = std::function<Vector(const Vector&)>;

/// Uniformly sampled trajectory; column k of states is the state at times[k].
struct Trajectory {
  std::vector<double> times;
  Matrix states;

  Eigen::Index size() const { return states.cols(); }
  Vector state(Eigen::Index k) const { return states.col(k); }
  Vector last() const { return states.col(states.cols() - 1); }
};

namespace integrators {

/// Classical fourth-order Runge-Kutta step.
Vector rk4_step(const Field& field, const Vector& x, double dt);

struct Gl4Options {
  double fp_tol = 1e-12;
  int fp_max_iter = 50;
};

/// Two-stage Gauss-Legendre step (order 4, symplectic). Stage slopes are
/// found by fixed-point iteration started from the explicit-Euler guess
/// K_i = f(x). Reports the iteration count through `iterations` if given.
Vector gl4_step(const Field& field, const Vector& x, double dt, const Gl4Options& opts = {},
                int* iterations = nullptr);

/// Composition of velocity-Verlet substeps of sizes gamma_i * dt for a
/// separable Hamiltonian T(p) + U(q).
Vector symplectic_composition_step(const SystemSpec& spec, const Vector& x, double dt,
                                   std::span<const double> coefficients);

/// 17-stage symmetric composition of order 8 (Kahan & Li, s17odr8a).
std::span<const double> kahan_li8_coefficients();
/// Triple-jump composition of order 4 (Yoshida).
std::span<const double> yoshida4_coefficients();
/// 7-stage composition of order 6 (Yoshida solution A).
std::span<const double> yoshida6_coefficients();

}  // namespace integrators

enum class StepperKind { RK4, GL4, SymplecticComposition };

struct StepperSpec {
  StepperKind kind = StepperKind::RK4;
  double dt = 0.01;  // sampling interval of the produced trajectory
  int substeps = 1;  // internal steps per sampling interval
  integrators::Gl4Options gl4_options;
  std::vector<double> coefficients{1.0};  // composition only
  int order = 2;                          // declared order of the composition

  static StepperSpec rk4(double dt, int substeps = 1);
  static StepperSpec gl4(double dt, int substeps = 1, integrators::Gl4Options opts = {});
  static StepperSpec leapfrog(double dt, int substeps = 1);
  static StepperSpec kahan_li8(double dt, int substeps = 1);

  /// Throws InvalidArgument when an invariant is broken.
  void validate() const;
};

namespace integrators {

/// One sampling interval of the stepper applied to the true dynamics of spec.
Vector step(const StepperSpec& stepper, const SystemSpec& spec, const Vector& x);

/// n_steps + 1 samples starting from x0 at t0. Stepper failures are rethrown
/// with the failing step index.
Trajectory propagate(const StepperSpec& stepper, const SystemSpec& spec, const Vector& x0, int n_steps,
                     double t0 = 0.0);

/// Same for an arbitrary field; composition steppers are rejected because
/// they need the separable splitting.
Trajectory propagate(const StepperSpec& stepper, const Field& field, const Vector& x0, int n_steps,
                     double t0 = 0.0);

}  // namespace integrators
}  // namespace hamassim
