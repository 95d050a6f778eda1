#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hamassim/models.hpp"
#include "hamassim/systems.hpp"

namespace hamassim {

struct MetricSeries {
  std::vector<double> times;
  std::vector<double> values;
  std::string label;

  std::size_t size() const { return values.size(); }
  /// Throws InvalidArgument on unequal lengths or non-finite values.
  void validate() const;
};

struct RmseResult {
  double scalar = 0.0;
  MetricSeries series;
};

/// Component selectors for a 2n-dimensional phase state [q, p].
std::vector<int> position_components(int dof);
std::vector<int> momentum_components(int dof);

/// Per-step RMSE over the selected components of all trajectories, and the
/// RMSE over every step and trajectory. Throws GridMismatch unless all
/// trajectories share one time grid.
RmseResult rmse(std::span<const Trajectory> predicted, std::span<const Trajectory> truth,
                std::span<const int> components, const std::string& label = "rmse");

/// Unweighted mean of the last n values; the first n-1 entries average
/// whatever is available.
MetricSeries sma(const MetricSeries& series, int n = 240);

struct EnergyResult {
  MetricSeries series;
  double rmse = 0.0;  // against the energy of the first state
};

EnergyResult energy_series(const SystemSpec& spec, const Trajectory& trajectory);
/// Learned H_theta along the trajectory (HNN/AHNN only).
EnergyResult energy_series(const LearnedModel& model, const Trajectory& trajectory);

/// Max minus min of the energy over the initial |energy|.
double relative_energy_spread(const SystemSpec& spec, const Trajectory& trajectory);

struct ScenarioMetrics {
  double pos_rmse = std::numeric_limits<double>::quiet_NaN();
  double vel_rmse = std::numeric_limits<double>::quiet_NaN();
};

struct ModelResult {
  std::string label;
  ScenarioMetrics open_true;
  ScenarioMetrics open_perturbed;
  ScenarioMetrics ukf_true;
  ScenarioMetrics ukf_perturbed;
  double energy_rmse = std::numeric_limits<double>::quiet_NaN();
};

struct ComparisonReport {
  std::string csv;
  std::string text;
  /// Whether AHNN_W <= HNN <= NODE <= MLP held for the open-loop
  /// true-initial position RMSE among the models present.
  bool ordering_held = true;
};

/// Missing metrics (NaN) are written as empty cells.
ComparisonReport compare_report(std::span<const ModelResult> results);

}  // namespace hamassim
