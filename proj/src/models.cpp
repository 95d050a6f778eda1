#include "hamassim/models.hpp"

#include <cmath>
#include <string>

namespace hamassim {

NormalizationStats NormalizationStats::fit(const Matrix& states) {
  if (states.cols() == 0) fail(ErrorCode::InvalidArgument, "cannot fit normalization on an empty set");
  NormalizationStats s{states.rowwise().minCoeff(), states.rowwise().maxCoeff()};
  for (Eigen::Index i = 0; i < s.min.size(); ++i) {
    if (!(s.max[i] > s.min[i])) {
      fail(ErrorCode::InvalidArgument, "dimension " + std::to_string(i) + " is constant in the training data");
    }
  }
  return s;
}

NormalizationStats NormalizationStats::identity(int dim) {
  return NormalizationStats{Vector::Constant(dim, -1.0), Vector::Constant(dim, 1.0)};
}

Vector NormalizationStats::scale() const { return 2.0 * (max - min).cwiseInverse(); }
Vector NormalizationStats::center() const { return 0.5 * (max + min); }

Vector NormalizationStats::normalize(const Vector& x) const {
  if (x.size() != min.size()) fail(ErrorCode::DimensionMismatch, "normalize: wrong state length");
  return (x - center()).cwiseProduct(scale());
}

Vector NormalizationStats::denormalize(const Vector& xn) const {
  if (xn.size() != min.size()) fail(ErrorCode::DimensionMismatch, "denormalize: wrong state length");
  return xn.cwiseQuotient(scale()) + center();
}

Matrix NormalizationStats::normalize(const Matrix& x) const {
  if (x.rows() != min.size()) fail(ErrorCode::DimensionMismatch, "normalize: wrong state length");
  return (x.colwise() - center()).array().colwise() * scale().array();
}

Matrix NormalizationStats::denormalize(const Matrix& xn) const {
  if (xn.rows() != min.size()) fail(ErrorCode::DimensionMismatch, "denormalize: wrong state length");
  Matrix out = xn.array().colwise() / scale().array();
  out.colwise() += center();
  return out;
}

Vector grad_hamiltonian(const HamiltonianFunction& h, const Vector& x) {
  if (x.size() != h.dim()) {
    fail(ErrorCode::DimensionMismatch, "grad_hamiltonian: state has length " + std::to_string(x.size()) +
                                           ", model expects " + std::to_string(h.dim()));
  }
  const ad::Recording rec = ad::record([&h](std::span<const ad::Var> v) { return h.evaluate(v); }, x);
  return ad::backward(rec);
}

ad::Var SystemHamiltonian::evaluate(std::span<const ad::Var> x) const {
  const auto n = static_cast<std::size_t>(spec_.dof());
  if (x.size() != 2 * n) fail(ErrorCode::DimensionMismatch, "SystemHamiltonian: wrong state length");
  ad::Var kinetic(0.0);
  for (std::size_t i = 0; i < n; ++i) kinetic = kinetic + x[n + i] * x[n + i];
  kinetic = kinetic / (2.0 * spec_.mass());
  if (spec_.is_mass_spring()) return kinetic + 0.5 * spec_.mass_spring().k * x[0] * x[0];
  return kinetic + systems::zonal_potential<ad::Var>(spec_.orbit(), x.first(3));
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::HNN: return "HNN";
    case ModelKind::AHNN: return "AHNN";
    case ModelKind::MLP: return "MLP";
    case ModelKind::NODE: return "NODE";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "HNN") return ModelKind::HNN;
  if (s == "AHNN") return ModelKind::AHNN;
  if (s == "MLP") return ModelKind::MLP;
  if (s == "NODE") return ModelKind::NODE;
  fail(ErrorCode::InvalidArgument, "unknown model kind '" + s + "'");
}

LearnedModel::LearnedModel(ModelKind kind, MlpParams net, NormalizationStats norm, double dt, int window,
                           int substeps, double field_scale)
    : kind_(kind),
      net_(std::move(net)),
      norm_(std::move(norm)),
      dt_(dt),
      window_(window),
      substeps_(substeps),
      field_scale_(field_scale) {
  net_.validate();
  if (!(dt_ > 0.0)) fail(ErrorCode::InvalidArgument, "model dt must be positive");
  if (window_ < 1) fail(ErrorCode::InvalidArgument, "window must be >= 1");
  if (substeps_ < 1) fail(ErrorCode::InvalidArgument, "substeps must be >= 1");
  if (!(field_scale_ > 0.0) || !std::isfinite(field_scale_)) {
    fail(ErrorCode::InvalidArgument, "field_scale must be positive and finite");
  }
  const int dim = norm_.dim();
  if (net_.input_dim() != dim) fail(ErrorCode::DimensionMismatch, "network input does not match state dimension");
  const int expected_out = is_hamiltonian() ? 1 : dim;
  if (net_.output_dim() != expected_out) {
    fail(ErrorCode::DimensionMismatch, label() + " network must have output size " + std::to_string(expected_out));
  }
  if (kind_ != ModelKind::AHNN && window_ != 1) {
    fail(ErrorCode::InvalidArgument, "only AHNN models carry a window larger than 1");
  }
  if (dim % 2 == 0) coupling_ = field_scale_ * hamiltonian_coupling(norm_);
}

Vector hamiltonian_coupling(const NormalizationStats& norm) {
  const int n = norm.dim() / 2;
  const Vector s = norm.scale();
  const Vector w = s.head(n).cwiseProduct(s.tail(n));
  return w / w.mean();
}

Matrix apply_coupled_symplectic(const Vector& w, const Matrix& g) {
  const Eigen::Index n = g.rows() / 2;
  Matrix f(g.rows(), g.cols());
  f.topRows(n) = w.asDiagonal() * g.bottomRows(n);
  f.bottomRows(n) = -(w.asDiagonal() * g.topRows(n));
  return f;
}

LearnedModel LearnedModel::create(ModelKind kind, int phase_dim, const std::vector<int>& hidden,
                                  NormalizationStats norm, double dt, int window, Rng& rng) {
  std::vector<int> sizes{phase_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  const bool hamiltonian = kind == ModelKind::HNN || kind == ModelKind::AHNN;
  sizes.push_back(hamiltonian ? 1 : phase_dim);
  return LearnedModel(kind, MlpParams::glorot(sizes, rng), std::move(norm), dt, window);
}

std::string LearnedModel::label() const {
  if (kind_ == ModelKind::AHNN) return "AHNN_" + std::to_string(window_);
  return to_string(kind_);
}

Matrix LearnedModel::field_normalized(const Matrix& xn) const {
  if (kind_ == ModelKind::MLP) fail(ErrorCode::InvalidArgument, "the MLP baseline has no vector field");
  if (kind_ == ModelKind::NODE) return field_scale_ * mlp::forward(net_, xn);
  return apply_coupled_symplectic(coupling_, mlp::input_gradient(net_, xn));
}

Matrix LearnedModel::step_normalized(const Matrix& xn) const {
  if (kind_ == ModelKind::MLP) return mlp::forward(net_, xn);
  const double h = 1.0 / substeps_;
  Matrix x = xn;
  for (int s = 0; s < substeps_; ++s) {
    const Matrix k1 = field_normalized(x);
    const Matrix k2 = field_normalized(x + 0.5 * h * k1);
    const Matrix k3 = field_normalized(x + 0.5 * h * k2);
    const Matrix k4 = field_normalized(x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

Vector LearnedModel::step(const Vector& x) const {
  if (!x.allFinite()) fail(ErrorCode::NonFiniteState, label() + ": input state is not finite");
  Matrix out = norm_.denormalize(step_normalized(Matrix(norm_.normalize(x))));
  if (!out.allFinite()) fail(ErrorCode::NonFiniteState, label() + ": prediction is not finite");
  return out.col(0);
}

double LearnedModel::energy_normalized(const Vector& xn) const {
  if (!is_hamiltonian()) fail(ErrorCode::InvalidArgument, label() + " has no learned Hamiltonian");
  return mlp::forward(net_, xn)[0];
}

double LearnedModel::energy(const Vector& x) const { return energy_normalized(norm_.normalize(x)); }

ad::Var NetworkHamiltonian::evaluate(std::span<const ad::Var> x) const {
  std::vector<ad::Var> theta(net_.theta.data(), net_.theta.data() + net_.theta.size());
  std::vector<ad::Var> in(x.begin(), x.end());
  return mlp::forward_generic<ad::Var>(net_.layer_sizes, theta, std::move(in)).front();
}

double NetworkHamiltonian::value(const Vector& x) const { return mlp::forward(net_, x)[0]; }

Trajectory rollout(const Predictor& predictor, const Vector& x0, int k, double dt, double t0) {
  if (k < 1) fail(ErrorCode::InvalidArgument, "rollout needs k >= 1");
  Trajectory traj;
  traj.times.resize(static_cast<std::size_t>(k) + 1);
  traj.states.resize(x0.size(), k + 1);
  traj.states.col(0) = x0;
  traj.times[0] = t0;
  Vector x = x0;
  for (int i = 1; i <= k; ++i) {
    try {
      x = predictor.step(x);
    } catch (const Error& e) {
      throw Error(e.code(), "rollout step " + std::to_string(i) + ": " + e.what());
    }
    if (!x.allFinite()) fail(ErrorCode::NonFiniteState, "rollout step " + std::to_string(i) + " is not finite");
    traj.states.col(i) = x;
    traj.times[static_cast<std::size_t>(i)] = t0 + i * dt;
  }
  return traj;
}

}  // namespace hamassim
