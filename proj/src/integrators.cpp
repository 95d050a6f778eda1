#include "hamassim/integrators.hpp"

#include <array>
#include <cmath>
#include <numeric>
#include <string>

namespace hamassim {
namespace integrators {
namespace {

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) fail(ErrorCode::NonFiniteState, std::string(what) + " is not finite");
}

// Kahan & Li (1997), method s17odr8a. Symmetric: entries 10..17 mirror 1..8.
constexpr std::array<double, 17> kKahanLi8 = {
    0.13020248308889008087881763,  0.56116298177510838456196441,  -0.38947496264484728640807860,
    0.15884190655515560089621075,  -0.39590389413323757733623154, 0.18453964097831570709183254,
    0.25837438768632204729397911,  0.29501172360931029887096624,  -0.60550853383003451169892108,
    0.29501172360931029887096624,  0.25837438768632204729397911,  0.18453964097831570709183254,
    -0.39590389413323757733623154, 0.15884190655515560089621075,  -0.38947496264484728640807860,
    0.56116298177510838456196441,  0.13020248308889008087881763,
};

const std::array<double, 3> kYoshida4 = [] {
  const double cbrt2 = std::cbrt(2.0);
  const double w1 = 1.0 / (2.0 - cbrt2);
  const double w0 = -cbrt2 / (2.0 - cbrt2);
  return std::array<double, 3>{w1, w0, w1};
}();

// Yoshida (1990), sixth order, solution A.
const std::array<double, 7> kYoshida6 = [] {
  const double w1 = -0.117767998417887e1;
  const double w2 = 0.235573213359357e0;
  const double w3 = 0.784513610477560e0;
  const double w0 = 1.0 - 2.0 * (w1 + w2 + w3);
  return std::array<double, 7>{w3, w2, w1, w0, w1, w2, w3};
}();

}  // namespace

std::span<const double> kahan_li8_coefficients() { return kKahanLi8; }
std::span<const double> yoshida4_coefficients() { return kYoshida4; }
std::span<const double> yoshida6_coefficients() { return kYoshida6; }

Vector rk4_step(const Field& field, const Vector& x, double dt) {
  const Vector k1 = field(x);
  require_finite(k1, "RK4 stage 1");
  const Vector k2 = field(x + 0.5 * dt * k1);
  require_finite(k2, "RK4 stage 2");
  const Vector k3 = field(x + 0.5 * dt * k2);
  require_finite(k3, "RK4 stage 3");
  const Vector k4 = field(x + dt * k3);
  require_finite(k4, "RK4 stage 4");
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vector gl4_step(const Field& field, const Vector& x, double dt, const Gl4Options& opts, int* iterations) {
  static const double s3 = std::sqrt(3.0);
  const double a11 = 0.25;
  const double a12 = 0.25 - s3 / 6.0;
  const double a21 = 0.25 + s3 / 6.0;
  const double a22 = 0.25;

  Vector k1 = field(x);
  require_finite(k1, "GL4 initial slope");
  Vector k2 = k1;
  const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
  for (int it = 1; it <= opts.fp_max_iter; ++it) {
    Vector n1 = field(x + dt * (a11 * k1 + a12 * k2));
    Vector n2 = field(x + dt * (a21 * k1 + a22 * k2));
    require_finite(n1, "GL4 stage 1");
    require_finite(n2, "GL4 stage 2");
    const double change =
        std::abs(dt) * std::max((n1 - k1).cwiseAbs().maxCoeff(), (n2 - k2).cwiseAbs().maxCoeff());
    k1 = std::move(n1);
    k2 = std::move(n2);
    if (change <= opts.fp_tol * scale) {
      if (iterations != nullptr) *iterations = it;
      return x + 0.5 * dt * (k1 + k2);
    }
  }
  fail(ErrorCode::FixedPointDiverged,
       "GL4 stage iteration did not reach tolerance in " + std::to_string(opts.fp_max_iter) + " iterations");
}

Vector symplectic_composition_step(const SystemSpec& spec, const Vector& x, double dt,
                                   std::span<const double> coefficients) {
  if (x.size() != spec.phase_dim()) fail(ErrorCode::DimensionMismatch, "composition step: wrong phase dimension");
  const Eigen::Index n = spec.dof();
  Vector q = x.head(n);
  Vector p = x.tail(n);
  for (double gamma : coefficients) {
    const double h = gamma * dt;
    p -= 0.5 * h * systems::potential_gradient(spec, q);
    q += h * systems::kinetic_gradient(spec, p);
    p -= 0.5 * h * systems::potential_gradient(spec, q);
  }
  Vector out(2 * n);
  out << q, p;
  require_finite(out, "composition step result");
  return out;
}

}  // namespace integrators

StepperSpec StepperSpec::rk4(double dt, int substeps) {
  StepperSpec s;
  s.kind = StepperKind::RK4;
  s.dt = dt;
  s.substeps = substeps;
  s.order = 4;
  return s;
}

StepperSpec StepperSpec::gl4(double dt, int substeps, integrators::Gl4Options opts) {
  StepperSpec s;
  s.kind = StepperKind::GL4;
  s.dt = dt;
  s.substeps = substeps;
  s.gl4_options = opts;
  s.order = 4;
  return s;
}

StepperSpec StepperSpec::leapfrog(double dt, int substeps) {
  StepperSpec s;
  s.kind = StepperKind::SymplecticComposition;
  s.dt = dt;
  s.substeps = substeps;
  s.coefficients = {1.0};
  s.order = 2;
  return s;
}

StepperSpec StepperSpec::kahan_li8(double dt, int substeps) {
  StepperSpec s;
  s.kind = StepperKind::SymplecticComposition;
  s.dt = dt;
  s.substeps = substeps;
  const auto c = integrators::kahan_li8_coefficients();
  s.coefficients.assign(c.begin(), c.end());
  s.order = 8;
  return s;
}

void StepperSpec::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) fail(ErrorCode::InvalidArgument, "stepper dt must be positive");
  if (substeps < 1) fail(ErrorCode::InvalidArgument, "stepper substeps must be >= 1");
  if (kind == StepperKind::GL4 && (!(gl4_options.fp_tol > 0.0) || gl4_options.fp_max_iter < 1)) {
    fail(ErrorCode::InvalidArgument, "GL4 needs fp_tol > 0 and fp_max_iter >= 1");
  }
  if (kind == StepperKind::SymplecticComposition) {
    if (coefficients.empty()) fail(ErrorCode::InvalidArgument, "composition needs coefficients");
    const double total = std::accumulate(coefficients.begin(), coefficients.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-12) {
      fail(ErrorCode::InvalidArgument, "composition coefficients sum to " + std::to_string(total));
    }
  }
}

namespace integrators {
namespace {

Vector advance_field(const StepperSpec& stepper, const Field& field, const Vector& x) {
  const double h = stepper.dt / stepper.substeps;
  Vector y = x;
  for (int s = 0; s < stepper.substeps; ++s) {
    switch (stepper.kind) {
      case StepperKind::RK4: y = rk4_step(field, y, h); break;
      case StepperKind::GL4: y = gl4_step(field, y, h, stepper.gl4_options); break;
      case StepperKind::SymplecticComposition:
        fail(ErrorCode::InvalidArgument, "composition steppers need a separable system, not a bare field");
    }
  }
  return y;
}

template <class StepFn>
Trajectory run(const StepperSpec& stepper, const Vector& x0, int n_steps, double t0, StepFn&& step_fn) {
  stepper.validate();
  if (n_steps < 1) fail(ErrorCode::InvalidArgument, "propagate needs n_steps >= 1");
  Trajectory traj;
  traj.times.resize(static_cast<std::size_t>(n_steps) + 1);
  traj.states.resize(x0.size(), n_steps + 1);
  traj.states.col(0) = x0;
  traj.times[0] = t0;
  Vector x = x0;
  for (int k = 1; k <= n_steps; ++k) {
    try {
      x = step_fn(x);
    } catch (const Error& e) {
      throw Error(e.code(), "step " + std::to_string(k) + ": " + e.what());
    }
    traj.states.col(k) = x;
    traj.times[static_cast<std::size_t>(k)] = t0 + k * stepper.dt;
  }
  return traj;
}

}  // namespace

Vector step(const StepperSpec& stepper, const SystemSpec& spec, const Vector& x) {
  if (stepper.kind == StepperKind::SymplecticComposition) {
    const double h = stepper.dt / stepper.substeps;
    Vector y = x;
    for (int s = 0; s < stepper.substeps; ++s) y = symplectic_composition_step(spec, y, h, stepper.coefficients);
    return y;
  }
  return advance_field(stepper, [&spec](const Vector& v) { return systems::vector_field(spec, v); }, x);
}

Trajectory propagate(const StepperSpec& stepper, const SystemSpec& spec, const Vector& x0, int n_steps, double t0) {
  return run(stepper, x0, n_steps, t0, [&](const Vector& x) { return step(stepper, spec, x); });
}

Trajectory propagate(const StepperSpec& stepper, const Field& field, const Vector& x0, int n_steps, double t0) {
  if (stepper.kind == StepperKind::SymplecticComposition) {
    fail(ErrorCode::InvalidArgument, "composition steppers need a separable system, not a bare field");
  }
  return run(stepper, x0, n_steps, t0, [&](const Vector& x) { return advance_field(stepper, field, x); });
}

}  // namespace integrators
}  // namespace hamassim
