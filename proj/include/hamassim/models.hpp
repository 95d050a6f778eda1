#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hamassim/autodiff.hpp"
#include "hamassim/integrators.hpp"
#include "hamassim/mlp.hpp"

namespace hamassim {

/// Per-dimension min-max scaling onto [-1, 1].
struct NormalizationStats {
  Vector min;
  Vector max;

  /// Columns of states are samples. Throws InvalidArgument when a dimension
  /// is constant.
  static NormalizationStats fit(const Matrix& states);
  static NormalizationStats identity(int dim);

  int dim() const { return static_cast<int>(min.size()); }
  Vector scale() const;   // 2 / (max - min)
  Vector center() const;  // (max + min) / 2
  Vector normalize(const Vector& x) const;
  Vector denormalize(const Vector& xn) const;
  Matrix normalize(const Matrix& x) const;
  Matrix denormalize(const Matrix& xn) const;
};

/// A one-step map x_k -> x_{k+1} in physical coordinates.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual int state_dim() const = 0;
  virtual Vector step(const Vector& x) const = 0;
};

/// Scalar function of a phase point that can be recorded on the tape.
class HamiltonianFunction {
 public:
  virtual ~HamiltonianFunction() = default;
  virtual int dim() const = 0;
  virtual ad::Var evaluate(std::span<const ad::Var> x) const = 0;
  virtual double value(const Vector& x) const = 0;
};

/// [dH/dq, dH/dp] by reverse accumulation on a fresh tape.
Vector grad_hamiltonian(const HamiltonianFunction& h, const Vector& x);

/// The true Hamiltonian of a system as a HamiltonianFunction.
class SystemHamiltonian final : public HamiltonianFunction {
 public:
  explicit SystemHamiltonian(SystemSpec spec) : spec_(std::move(spec)) {}
  int dim() const override { return spec_.phase_dim(); }
  ad::Var evaluate(std::span<const ad::Var> x) const override;
  double value(const Vector& x) const override { return systems::hamiltonian(spec_, x); }

 private:
  SystemSpec spec_;
};

enum class ModelKind { HNN, AHNN, MLP, NODE };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

/// A learned one-step predictor.
///
/// HNN and AHNN share the runtime map: normalize, integrate the Hamiltonian
/// field of H_theta with RK4 over one sampling interval, de-normalize. The
/// network sees normalized states and the integration runs in normalized
/// time where one sampling interval has length 1, so the physical dt is
/// metadata only.
///
/// Canonical form in physical coordinates becomes f_q = w * dH/dp,
/// f_p = -w * dH/dq after per-axis scaling, with w_i = s_qi s_pi up to a
/// common factor. `coupling()` holds w normalized to mean 1, times the
/// fixed gain `field_scale()`, which also multiplies the NODE field.
/// NODE integrates an unconstrained field network the same way; MLP maps
/// the normalized state straight to the next one.
class LearnedModel final : public Predictor {
 public:
  LearnedModel() = default;
  LearnedModel(ModelKind kind, MlpParams net, NormalizationStats norm, double dt, int window = 1, int substeps = 1,
               double field_scale = 1.0);

  /// Standard architecture for kind with the given hidden layers.
  static LearnedModel create(ModelKind kind, int phase_dim, const std::vector<int>& hidden, NormalizationStats norm,
                             double dt, int window, Rng& rng);

  int state_dim() const override { return norm_.dim(); }
  Vector step(const Vector& x) const override;

  /// One step in normalized coordinates, columns are samples.
  Matrix step_normalized(const Matrix& xn) const;

  /// Learned H in normalized coordinates (HNN/AHNN only).
  double energy_normalized(const Vector& xn) const;
  /// Learned H evaluated at a physical state.
  double energy(const Vector& x) const;
  /// Hamiltonian field of H_theta in normalized coordinates (HNN/AHNN) or
  /// the NODE field.
  Matrix field_normalized(const Matrix& xn) const;

  ModelKind kind() const { return kind_; }
  bool is_hamiltonian() const { return kind_ == ModelKind::HNN || kind_ == ModelKind::AHNN; }
  std::string label() const;
  const MlpParams& net() const { return net_; }
  MlpParams& net() { return net_; }
  const NormalizationStats& norm() const { return norm_; }
  double dt() const { return dt_; }
  int window() const { return window_; }
  int substeps() const { return substeps_; }
  double field_scale() const { return field_scale_; }
  const Vector& coupling() const { return coupling_; }

  std::uint64_t seed = 0;
  std::string system;

 private:
  ModelKind kind_ = ModelKind::HNN;
  MlpParams net_;
  NormalizationStats norm_;
  double dt_ = 0.01;
  int window_ = 1;
  int substeps_ = 1;
  double field_scale_ = 1.0;
  Vector coupling_;
};

/// Per-degree-of-freedom weights w with mean 1, proportional to the product
/// of the position and momentum normalization scales.
Vector hamiltonian_coupling(const NormalizationStats& norm);

/// (w * g_p, -w * g_q) for packed gradients, one column per sample.
Matrix apply_coupled_symplectic(const Vector& w, const Matrix& g);

/// Learned H_theta(x) in normalized coordinates as a tape-recordable function.
class NetworkHamiltonian final : public HamiltonianFunction {
 public:
  explicit NetworkHamiltonian(const MlpParams& net) : net_(net) {}
  int dim() const override { return net_.input_dim(); }
  ad::Var evaluate(std::span<const ad::Var> x) const override;
  double value(const Vector& x) const override;

 private:
  const MlpParams& net_;
};

/// x0 followed by k autoregressive applications of the predictor.
Trajectory rollout(const Predictor& predictor, const Vector& x0, int k, double dt = 1.0, double t0 = 0.0);

/// Binary64-exact checkpoint in JSON with hex-float numbers.
void save_checkpoint(const LearnedModel& model, const std::string& path);
LearnedModel load_checkpoint(const std::string& path);
std::string checkpoint_to_string(const LearnedModel& model);
LearnedModel checkpoint_from_string(const std::string& text);

}  // namespace hamassim
