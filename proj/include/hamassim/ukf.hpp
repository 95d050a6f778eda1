#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hamassim/models.hpp"
#include "hamassim/systems.hpp"

namespace hamassim {

struct GaussianBelief {
  Vector mean;
  Matrix cov;

  int dim() const { return static_cast<int>(mean.size()); }
  /// Throws NotPositiveDefinite unless cov is symmetric and SPD.
  void validate() const;
};

struct UtConfig {
  double alpha = 1e-3;
  double beta = 2.0;
  double kappa = 0.0;

  /// alpha^2 (L + kappa) - L.
  double lambda(int dim) const { return alpha * alpha * (dim + kappa) - dim; }
  void validate(int dim) const;
};

/// 2L+1 sigma points as columns, with mean and covariance weights.
struct SigmaPointSet {
  Matrix points;
  Vector w_mean;
  Vector w_cov;

  int dim() const { return static_cast<int>(points.rows()); }
  Eigen::Index count() const { return points.cols(); }
};

/// Point 0 is the mean; points i and i+L are mean +- column i of the lower
/// Cholesky factor of (L + lambda) P.
SigmaPointSet make_sigma_points(const GaussianBelief& belief, const UtConfig& ut);

struct UtPrediction {
  GaussianBelief belief;
  SigmaPointSet propagated;
};

/// Propagates every sigma point through the predictor and recombines the
/// moments; process_noise is added to the covariance.
UtPrediction ut_predict(const SigmaPointSet& points, const Predictor& predictor, const Matrix& process_noise);

/// Measurement update with a linear observation model.
GaussianBelief ut_update(const GaussianBelief& prior, const SigmaPointSet& propagated, const ObservationSpec& obs,
                         const Vector& y);

struct UkfConfig {
  UtConfig ut;
  Matrix process_noise;
  ObservationSpec obs;
  int update_every = 60;

  void validate(int dim) const;
};

struct Measurement {
  int step;
  Vector y;
};

struct FilterStep {
  GaussianBelief belief;
  bool updated = false;
};

/// Simulated measurements of a reference trajectory at every
/// update_every-th step (step 0 excluded).
std::vector<Measurement> simulate_measurements(const Trajectory& truth, const ObservationSpec& obs, int update_every,
                                               Rng& rng);

/// Runs n_steps predict cycles from belief0, applying the measurement
/// update wherever a measurement is available. Returns n_steps + 1 entries,
/// the first being belief0.
std::vector<FilterStep> run_filter(const Predictor& predictor, const UkfConfig& config, const GaussianBelief& belief0,
                                   std::span<const Measurement> measurements, int n_steps);

struct UtGridResult {
  UtConfig best;
  double best_rmse = 0.0;
  std::vector<std::pair<UtConfig, double>> evaluated;  // failures score +inf
};

/// Exhaustive search over (alpha, beta, kappa) minimizing the RMSE of the
/// filtered means against a reference trajectory.
UtGridResult ut_grid_search(const Predictor& predictor, const UkfConfig& base, const GaussianBelief& belief0,
                            const Trajectory& truth, std::span<const Measurement> measurements,
                            std::span<const double> alphas, std::span<const double> betas,
                            std::span<const double> kappas);

/// x -> A x; the linear test system.
class LinearPredictor final : public Predictor {
 public:
  explicit LinearPredictor(Matrix a) : a_(std::move(a)) {}
  int state_dim() const override { return static_cast<int>(a_.rows()); }
  Vector step(const Vector& x) const override { return a_ * x; }
  const Matrix& matrix() const { return a_; }

 private:
  Matrix a_;
};

/// Per-step CSV: t, mean components, covariance diagonal, 2-sigma bounds,
/// updated flag.
std::string filter_csv(const std::vector<FilterStep>& steps, double dt);

}  // namespace hamassim
