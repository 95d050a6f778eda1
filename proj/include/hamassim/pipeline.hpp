#pragma once

#include <string>
#include <vector>

#include "hamassim/config.hpp"
#include "hamassim/eval.hpp"

namespace hamassim::pipeline {

/// data/{train,val,test}.csv and data/manifest.json.
void cmd_generate(const RunConfig& config);
/// models/<label>.json and models/<label>_history.csv for every model.
void cmd_train(const RunConfig& config);
/// predict/<label>.csv: open-loop rollouts from true and perturbed initials.
void cmd_predict(const RunConfig& config);
/// filter/<label>.csv: UKF beliefs from the perturbed initials.
void cmd_filter(const RunConfig& config);
/// report/report.csv, report.txt and plot-ready series.
void cmd_evaluate(const RunConfig& config);

/// Test trajectories used for prediction and filtering, cut to a common
/// number of steps.
struct EvalSet {
  std::vector<int> ids;
  std::vector<Trajectory> truth;
  int steps = 0;
};
EvalSet eval_set(const RunConfig& config, const TrajectoryDataset& data);

/// Initial mean error drawn from N(0, P0); fixed per run seed and trajectory.
Vector perturbation(const RunConfig& config, int trajectory_id);

/// Simulated measurements for one trajectory; fixed per run seed and
/// trajectory.
std::vector<Measurement> measurements(const RunConfig& config, const SystemSpec& spec, const Trajectory& truth,
                                      int trajectory_id);

struct ModelEvaluation {
  ModelResult result;
  MetricSeries open_pos;  // per-step position RMSE, perturbed initial
  MetricSeries ukf_pos;
  MetricSeries energy;    // mean true energy deviation along true-initial rollouts
};

/// All four scenarios for one model over the evaluation set.
ModelEvaluation evaluate_model(const RunConfig& config, const TrajectoryDataset& data, const EvalSet& set,
                               const LearnedModel& model);

}  // namespace hamassim::pipeline
