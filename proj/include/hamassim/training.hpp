#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hamassim/integrators.hpp"
#include "hamassim/models.hpp"

namespace hamassim {

// ---------------------------------------------------------------------------
// Datasets

/// Uniform initial-condition box for the mass-spring system and orbital
/// element ranges for the two-body system. Remaining orbital angles are
/// drawn uniformly in [0, 2 pi).
struct InitialConditionSampler {
  double state_low = -1.0;
  double state_high = 1.0;
  double periapsis_alt_low = 540.0;   // km
  double periapsis_alt_high = 560.0;  // km
  double ecc_low = 0.7;
  double ecc_high = 0.8;
  double inc_low_deg = 60.0;
  double inc_high_deg = 66.0;

  Vector sample(const SystemSpec& spec, Rng& rng) const;
};

struct DatasetConfig {
  SystemSpec spec;
  StepperSpec stepper = StepperSpec::gl4(0.01);
  InitialConditionSampler sampler;
  int count = 2500;
  /// Samples per trajectory minus one. For orbits, when periods > 0 the
  /// length is round(periods * T / dt) with T the Keplerian period.
  int n_steps = 1000;
  double periods = 0.0;
  std::uint64_t seed = 7;
  double train_fraction = 0.80;
  double val_fraction = 0.15;

  void validate() const;
};

struct Window {
  int trajectory;
  int start;
};

struct TrajectoryDataset {
  SystemSpec spec;
  double dt = 0.01;
  std::uint64_t seed = 0;
  std::vector<Trajectory> trajectories;
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
  NormalizationStats norm;  // fitted on the train split only

  /// Start indices at stride 1 for windows of length W inside the listed
  /// trajectories.
  std::vector<Window> windows(std::span<const int> split, int window) const;
  /// Every state of the listed trajectories, one column per state.
  Matrix states(std::span<const int> split) const;
};

/// Assigns the first round(0.8 N) trajectories to train, the next
/// round(0.15 N) to validation, and the rest to test, then fits the
/// normalization on train.
void assign_splits(TrajectoryDataset& ds, double train_fraction = 0.80, double val_fraction = 0.15);

/// Integrates `count` trajectories with the configured stepper. Each
/// trajectory draws from its own generator seeded from the master seed, so
/// the result is independent of `jobs`. A failed trajectory is redrawn up to
/// 10 times.
TrajectoryDataset generate_dataset(const DatasetConfig& config, int jobs = 1);

/// CSV per split (traj_id, step, t, q1..qn, p1..pn) plus manifest.json.
void write_dataset(const TrajectoryDataset& ds, const std::string& dir);
TrajectoryDataset read_dataset(const std::string& dir);

// ---------------------------------------------------------------------------
// Losses

/// 0.5 r^2 for |r| <= delta, delta (|r| - delta / 2) beyond.
double huber(double r, double delta);
double huber_derivative(double r, double delta);
/// Sum of componentwise Huber terms.
double huber(const Vector& residual, double delta);

/// d(F(x_k), x_{k+1}).
double loss_one_step(const Predictor& predictor, const Vector& xk, const Vector& xk1, double delta);
/// Mean over i = 1..W of d(F^i(x_k), x_{k+i}).
double loss_ahnn(const Predictor& predictor, const Vector& xk, std::span<const Vector> targets, double delta);

// ---------------------------------------------------------------------------
// Optimization

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWState {
  Vector m;
  Vector v;
  long step = 0;
};

/// Decoupled weight decay followed by the bias-corrected Adam update.
void adamw_step(Vector& params, const Vector& grads, AdamWState& state, const AdamWConfig& config, double lr);

class LrSchedule {
 public:
  virtual ~LrSchedule() = default;
  virtual double lr(int epoch) const = 0;
};

/// lr(e) = lr_inf + (lr0 - lr_inf) exp(-e / tau), tau = epochs / 5.
class ExpDecaySchedule final : public LrSchedule {
 public:
  ExpDecaySchedule(double lr0, double lr_inf, int epochs);
  double lr(int epoch) const override;

 private:
  double lr0_;
  double lr_inf_;
  double tau_;
};

struct PrunerConfig {
  int fit_epochs = 10;
  int horizon = 50;
  double threshold = 1e300;
};

/// Least-squares fit of a exp(-b e) + c (or a exp(-b e) when the offset is
/// not identifiable) to losses at epochs 1..n, evaluated at `horizon`.
/// Returns nullopt when the fit fails.
std::optional<double> pfl_forecast(std::span<const double> losses, int horizon);

enum class PruneDecision { Continue, Stop };
/// Stop iff the forecast exceeds the threshold. A failed fit never stops.
PruneDecision pfl_prune(std::span<const double> losses, int horizon, double threshold);

// ---------------------------------------------------------------------------
// Training

struct ModelSpec {
  ModelKind kind = ModelKind::HNN;
  int window = 1;
  std::vector<int> hidden{256, 256, 256};
  int substeps = 1;
  double field_scale = 1.0;

  std::string label() const;
};

struct TrainConfig {
  int batch_size = 256;
  int epochs = 250;
  double lr0 = 1e-3;
  double lr_inf = 1e-5;
  AdamWConfig adamw;
  double huber_delta = 1.0;
  std::uint64_t seed = 7;
  std::optional<PrunerConfig> pruner;
  int jobs = 1;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> lr;
  int best_epoch = -1;
  bool pruned = false;
};

struct TrainResult {
  LearnedModel model;
  TrainHistory history;
};

/// Mean windowed loss and its parameter gradient for a batch of windows
/// given in normalized coordinates: x0 is 2n x B, targets[i] holds the
/// states i+1 steps ahead. The gradient is accumulated in fixed-size column
/// chunks summed in order, so the result does not depend on `jobs`.
struct BatchLoss {
  double loss = 0.0;
  Vector grad;
};
BatchLoss batch_loss(const LearnedModel& model, const Matrix& x0, std::span<const Matrix> targets, double delta,
                     bool with_grad, int jobs = 1);

/// Reference route: the same single-window loss recorded on the scalar
/// tape (including the input-gradient program for Hamiltonian models) and
/// differentiated with respect to every network parameter.
BatchLoss tape_loss(const LearnedModel& model, const Vector& x0, std::span<const Vector> targets, double delta);

/// Seeded mini-batch AdamW training; returns the parameters with the best
/// validation loss.
TrainResult train_model(LearnedModel model, const TrajectoryDataset& data, const TrainConfig& config);
TrainResult train(const ModelSpec& spec, const TrajectoryDataset& data, const TrainConfig& config);

void write_history(const TrainHistory& history, const std::string& path);

}  // namespace hamassim
