#include "hamassim/systems.hpp"

#include <array>
#include <numbers>
#include <string>

namespace hamassim {

Vector PhaseState::packed() const {
  if (q.size() != p.size()) fail(ErrorCode::DimensionMismatch, "PhaseState: q and p differ in length");
  Vector x(q.size() + p.size());
  x << q, p;
  return x;
}

PhaseState PhaseState::unpack(const Vector& x) {
  if (x.size() % 2 != 0) fail(ErrorCode::DimensionMismatch, "PhaseState: odd phase dimension");
  const Eigen::Index n = x.size() / 2;
  return PhaseState{x.head(n), x.tail(n)};
}

SystemSpec::SystemSpec(MassSpring s) : params_(s) {
  if (!(s.k > 0.0) || !(s.m > 0.0)) fail(ErrorCode::InvalidArgument, "mass-spring needs k > 0 and m > 0");
}

SystemSpec::SystemSpec(TwoBodyJ2 s) : params_(s) {
  if (!(s.mu > 0.0) || !(s.r_eq > 0.0) || !(s.m > 0.0) || !(s.j2 >= 0.0)) {
    fail(ErrorCode::InvalidArgument, "two-body spec needs mu, r_eq, m > 0 and j2 >= 0");
  }
}

namespace systems {
namespace {

void require_dim(const SystemSpec& spec, const Vector& x) {
  if (x.size() != spec.phase_dim()) {
    fail(ErrorCode::DimensionMismatch, spec.name() + " expects a phase vector of length " +
                                           std::to_string(spec.phase_dim()) + ", got " + std::to_string(x.size()));
  }
}

void require_radius(const Vector& q) {
  if (!(q.norm() > 0.0)) fail(ErrorCode::SingularRadius, "position at the gravitational singularity");
}

}  // namespace

double zonal_potential(const SystemSpec& spec, const Vector& q) {
  if (!spec.is_orbit()) fail(ErrorCode::InvalidArgument, "zonal_potential needs a two-body system");
  if (q.size() != 3) fail(ErrorCode::DimensionMismatch, "zonal_potential expects a 3-vector");
  require_radius(q);
  return zonal_potential<double>(spec.orbit(), std::span<const double>(q.data(), 3));
}

Vector potential_gradient(const SystemSpec& spec, const Vector& q) {
  if (spec.is_mass_spring()) {
    if (q.size() != 1) fail(ErrorCode::DimensionMismatch, "mass-spring expects a scalar position");
    return spec.mass_spring().k * q;
  }
  if (q.size() != 3) fail(ErrorCode::DimensionMismatch, "zonal potential expects a 3-vector");
  require_radius(q);
  // One tape per thread, reused across calls.
  thread_local ad::Tape tape;
  tape.clear();
  const std::array<ad::Var, 3> qv{tape.input(q[0]), tape.input(q[1]), tape.input(q[2])};
  const ad::Var u = zonal_potential<ad::Var>(spec.orbit(), std::span<const ad::Var>(qv));
  return tape.gradient(u);
}

Vector kinetic_gradient(const SystemSpec& spec, const Vector& p) { return p / spec.mass(); }

double hamiltonian(const SystemSpec& spec, const Vector& x) {
  require_dim(spec, x);
  const Eigen::Index n = spec.dof();
  const double kinetic = x.tail(n).squaredNorm() / (2.0 * spec.mass());
  if (spec.is_mass_spring()) return kinetic + 0.5 * spec.mass_spring().k * x[0] * x[0];
  return kinetic + zonal_potential(spec, Vector(x.head(n)));
}

Vector hamiltonian_gradient(const SystemSpec& spec, const Vector& x) {
  require_dim(spec, x);
  const Eigen::Index n = spec.dof();
  Vector g(2 * n);
  g << potential_gradient(spec, x.head(n)), kinetic_gradient(spec, x.tail(n));
  return g;
}

Vector apply_symplectic(const Vector& grad) {
  const Eigen::Index n = grad.size() / 2;
  Vector f(grad.size());
  f << grad.tail(n), -grad.head(n);
  return f;
}

Vector vector_field(const SystemSpec& spec, const Vector& x) {
  return apply_symplectic(hamiltonian_gradient(spec, x));
}

Vector orbit_state_from_elements(const TwoBodyJ2& s, double semi_major_axis, double eccentricity,
                                 double inclination, double raan, double arg_periapsis, double true_anomaly) {
  if (!(semi_major_axis > 0.0) || !(eccentricity >= 0.0 && eccentricity < 1.0)) {
    fail(ErrorCode::InvalidArgument, "orbit elements describe no closed orbit");
  }
  const double semi_latus = semi_major_axis * (1.0 - eccentricity * eccentricity);
  const double r = semi_latus / (1.0 + eccentricity * std::cos(true_anomaly));
  const double vscale = std::sqrt(s.mu / semi_latus);

  const Eigen::Vector3d r_pf(r * std::cos(true_anomaly), r * std::sin(true_anomaly), 0.0);
  const Eigen::Vector3d v_pf(-vscale * std::sin(true_anomaly), vscale * (eccentricity + std::cos(true_anomaly)), 0.0);

  const double co = std::cos(raan), so = std::sin(raan);
  const double cw = std::cos(arg_periapsis), sw = std::sin(arg_periapsis);
  const double ci = std::cos(inclination), si = std::sin(inclination);
  Eigen::Matrix3d rot;
  rot << co * cw - so * sw * ci, -co * sw - so * cw * ci, so * si,
         so * cw + co * sw * ci, -so * sw + co * cw * ci, -co * si,
         sw * si, cw * si, ci;

  Vector x(6);
  x << rot * r_pf, s.m * (rot * v_pf);
  return x;
}

double orbital_period(const TwoBodyJ2& s, double semi_major_axis) {
  return 2.0 * std::numbers::pi * std::sqrt(semi_major_axis * semi_major_axis * semi_major_axis / s.mu);
}

}  // namespace systems

ObservationSpec ObservationSpec::position_only(int dof, const Matrix& noise_cov) {
  Matrix h = Matrix::Zero(dof, 2 * dof);
  h.leftCols(dof).setIdentity();
  ObservationSpec o = custom_linear(h, noise_cov);
  o.kind = ObservationKind::PositionOnly;
  return o;
}

ObservationSpec ObservationSpec::full_state(int dof, const Matrix& noise_cov) {
  ObservationSpec o = custom_linear(Matrix::Identity(2 * dof, 2 * dof), noise_cov);
  o.kind = ObservationKind::FullState;
  return o;
}

ObservationSpec ObservationSpec::custom_linear(const Matrix& h, const Matrix& noise_cov) {
  if (noise_cov.rows() != h.rows() || noise_cov.cols() != h.rows()) {
    fail(ErrorCode::DimensionMismatch, "observation noise covariance must be n_o x n_o");
  }
  return ObservationSpec{ObservationKind::CustomLinear, h, noise_cov};
}

Vector ObservationSpec::apply(const Vector& x) const {
  if (x.size() != h.cols()) fail(ErrorCode::DimensionMismatch, "observation: state has the wrong length");
  return h * x;
}

Vector observe(const ObservationSpec& obs, const Vector& x, Rng& rng) {
  Vector y = obs.apply(x);
  if (obs.noise_cov.isZero(0.0)) return y;
  const Matrix l = linalg::cholesky_lower(obs.noise_cov);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(y.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  return y + l * z;
}

}  // namespace hamassim
