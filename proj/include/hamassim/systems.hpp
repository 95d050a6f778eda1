#pragma once

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <variant>

#include "hamassim/autodiff.hpp"
#include "hamassim/linalg.hpp"

namespace hamassim {

using Rng = std::mt19937_64;

/// Phase point x = (q, p). Stored packed as a 2n vector everywhere else in
/// the library; this type is the unpacked view.
struct PhaseState {
  Vector q;
  Vector p;

  Vector packed() const;
  static PhaseState unpack(const Vector& x);
};

struct MassSpring {
  double k = 5.0;  // N/m
  double m = 1.0;  // kg
};

/// Two-body gravity with the J2 zonal term, in km, km/s, s.
struct TwoBodyJ2 {
  double mu = 398600.4418;  // km^3/s^2
  double r_eq = 6378.1363;  // km
  double j2 = 1.0826e-3;
  double m = 1.0;  // kg
};

class SystemSpec {
 public:
  SystemSpec() = default;
  SystemSpec(MassSpring s);  // NOLINT(google-explicit-constructor)
  SystemSpec(TwoBodyJ2 s);   // NOLINT(google-explicit-constructor)

  bool is_mass_spring() const { return std::holds_alternative<MassSpring>(params_); }
  bool is_orbit() const { return std::holds_alternative<TwoBodyJ2>(params_); }
  const MassSpring& mass_spring() const { return std::get<MassSpring>(params_); }
  const TwoBodyJ2& orbit() const { return std::get<TwoBodyJ2>(params_); }

  /// Degrees of freedom n; the phase dimension is 2n.
  int dof() const { return is_mass_spring() ? 1 : 3; }
  int phase_dim() const { return 2 * dof(); }
  double mass() const { return is_mass_spring() ? mass_spring().m : orbit().m; }
  std::string name() const { return is_mass_spring() ? "mass_spring" : "two_body_j2"; }

 private:
  std::variant<MassSpring, TwoBodyJ2> params_ = MassSpring{};
};

namespace systems {

/// U(q) for the J2-truncated zonal expansion. Latitude enters only via
/// sin(phi) = z / r, so the expression is smooth away from r = 0.
template <class T>
T zonal_potential(const TwoBodyJ2& s, std::span<const T> q) {
  using std::sqrt;
  const T r2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
  const T r = sqrt(r2);
  const T sin_lat = q[2] / r;
  const T legendre20 = (3.0 * sin_lat * sin_lat - 1.0) * 0.5;
  const T ratio = s.r_eq / r;
  return -(s.mu * s.m / r) * (1.0 - ratio * ratio * s.j2 * legendre20);
}

double zonal_potential(const SystemSpec& spec, const Vector& q);

/// dU/dq through the autodiff tape.
Vector potential_gradient(const SystemSpec& spec, const Vector& q);
/// dT/dp = p / m.
Vector kinetic_gradient(const SystemSpec& spec, const Vector& p);

double hamiltonian(const SystemSpec& spec, const Vector& x);
/// grad H = (dH/dq, dH/dp).
Vector hamiltonian_gradient(const SystemSpec& spec, const Vector& x);
/// J grad H = (dH/dp, -dH/dq).
Vector vector_field(const SystemSpec& spec, const Vector& x);

/// Multiplies a packed gradient by the canonical symplectic matrix.
Vector apply_symplectic(const Vector& grad);

/// Cartesian state (q in km, p = m v) from classical orbital elements.
/// Angles in radians.
Vector orbit_state_from_elements(const TwoBodyJ2& s, double semi_major_axis, double eccentricity,
                                 double inclination, double raan, double arg_periapsis, double true_anomaly);

/// Keplerian period 2 pi sqrt(a^3 / mu).
double orbital_period(const TwoBodyJ2& s, double semi_major_axis);

}  // namespace systems

enum class ObservationKind { PositionOnly, FullState, CustomLinear };

/// Linear observation y = H x + eta with eta ~ N(0, noise_cov).
struct ObservationSpec {
  ObservationKind kind = ObservationKind::PositionOnly;
  Matrix h;          // n_o x 2n
  Matrix noise_cov;  // n_o x n_o, SPD or zero

  static ObservationSpec position_only(int dof, const Matrix& noise_cov);
  static ObservationSpec full_state(int dof, const Matrix& noise_cov);
  static ObservationSpec custom_linear(const Matrix& h, const Matrix& noise_cov);

  int output_dim() const { return static_cast<int>(h.rows()); }
  int state_dim() const { return static_cast<int>(h.cols()); }
  /// Noise-free H(x).
  Vector apply(const Vector& x) const;
};

/// H(x) plus a Gaussian draw from noise_cov; exactly H(x) when noise_cov is zero.
Vector observe(const ObservationSpec& obs, const Vector& x, Rng& rng);

}  // namespace hamassim
