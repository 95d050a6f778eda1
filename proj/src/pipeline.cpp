#include "hamassim/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

#include "hamassim/io.hpp"
#include "hamassim/parallel.hpp"

namespace hamassim::pipeline {

namespace fs = std::filesystem;

namespace {

enum class Stream : std::uint64_t { Perturbation = 1, Measurement = 2 };

Rng stream_rng(std::uint64_t seed, int trajectory_id, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trajectory_id), static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create '" + dir + "': " + ec.message());
}

TrajectoryDataset load_data(const RunConfig& config) {
  if (!fs::exists(path_in(config.data_dir(), "manifest.json"))) {
    fail(ErrorCode::MissingArtifact, "no dataset in '" + config.data_dir() + "'; run generate first");
  }
  return read_dataset(config.data_dir());
}

std::string checkpoint_path(const RunConfig& config, const ModelSpec& spec) {
  return path_in(config.model_dir(), spec.label() + ".json");
}

std::vector<LearnedModel> load_models(const RunConfig& config) {
  std::vector<LearnedModel> out;
  for (const ModelSpec& m : config.models) {
    const std::string p = checkpoint_path(config, m);
    if (!fs::exists(p)) fail(ErrorCode::MissingArtifact, "no checkpoint '" + p + "'; run train first");
  }
  for (const ModelSpec& m : config.models) out.push_back(load_checkpoint(checkpoint_path(config, m)));
  return out;
}

std::string state_header(int dof) {
  std::string h;
  for (int i = 0; i < dof; ++i) h += ",q" + std::to_string(i + 1);
  for (int i = 0; i < dof; ++i) h += ",p" + std::to_string(i + 1);
  return h;
}

void append_states(std::ostringstream& out, int id, const std::string& scenario, const Trajectory& t) {
  for (Eigen::Index k = 0; k < t.size(); ++k) {
    out << id << "," << scenario << "," << k << "," << io::format_double(t.times[static_cast<std::size_t>(k)]);
    for (Eigen::Index i = 0; i < t.states.rows(); ++i) out << "," << io::format_double(t.states(i, k));
    out << "\n";
  }
}

GaussianBelief initial_belief(const RunConfig& config, const Vector& mean) {
  return GaussianBelief{mean, config.filter.p0()};
}

std::vector<FilterStep> filter_one(const RunConfig& config, const SystemSpec& spec, const LearnedModel& model,
                                   const EvalSet& set, std::size_t j, const Vector& mean) {
  std::vector<Measurement> ms = measurements(config, spec, set.truth[j], set.ids[j]);
  return run_filter(model, config.filter.ukf(spec), initial_belief(config, mean), ms, set.steps);
}

Trajectory belief_trajectory(const std::vector<FilterStep>& steps, const Trajectory& grid) {
  Trajectory t;
  t.times = grid.times;
  t.states.resize(grid.states.rows(), static_cast<Eigen::Index>(steps.size()));
  for (std::size_t k = 0; k < steps.size(); ++k) t.states.col(static_cast<Eigen::Index>(k)) = steps[k].belief.mean;
  return t;
}

void log(const std::string& msg) { std::clog << "[hamassim] " << msg << std::endl; }

}  // namespace

Vector perturbation(const RunConfig& config, int trajectory_id) {
  Rng rng = stream_rng(config.seed, trajectory_id, Stream::Perturbation);
  std::normal_distribution<double> n01(0.0, 1.0);
  Vector z(config.filter.p0_diag.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = n01(rng);
  return config.filter.p0_diag.cwiseSqrt().cwiseProduct(z);
}

std::vector<Measurement> measurements(const RunConfig& config, const SystemSpec& spec, const Trajectory& truth,
                                      int trajectory_id) {
  Rng rng = stream_rng(config.seed, trajectory_id, Stream::Measurement);
  return simulate_measurements(truth, config.filter.ukf(spec).obs, config.filter.update_every, rng);
}

EvalSet eval_set(const RunConfig& config, const TrajectoryDataset& data) {
  EvalSet set;
  set.ids = data.test;
  if (set.ids.empty()) fail(ErrorCode::InvalidArgument, "the dataset has no test trajectories");
  if (config.filter.trajectories > 0 && static_cast<std::size_t>(config.filter.trajectories) < set.ids.size()) {
    set.ids.resize(static_cast<std::size_t>(config.filter.trajectories));
  }
  Eigen::Index shortest = std::numeric_limits<Eigen::Index>::max();
  for (int id : set.ids) shortest = std::min(shortest, data.trajectories[static_cast<std::size_t>(id)].size());
  set.steps = static_cast<int>(shortest - 1);
  if (config.filter.steps > 0) set.steps = std::min(set.steps, config.filter.steps);
  if (set.steps < 1) fail(ErrorCode::InvalidArgument, "test trajectories are too short to evaluate");
  for (int id : set.ids) {
    const Trajectory& t = data.trajectories[static_cast<std::size_t>(id)];
    Trajectory cut;
    cut.times.assign(t.times.begin(), t.times.begin() + set.steps + 1);
    cut.states = t.states.leftCols(set.steps + 1);
    set.truth.push_back(std::move(cut));
  }
  return set;
}

ModelEvaluation evaluate_model(const RunConfig& config, const TrajectoryDataset& data, const EvalSet& set,
                               const LearnedModel& model) {
  const std::size_t n = set.ids.size();
  std::vector<Trajectory> open_true(n), open_pert(n), ukf_true(n), ukf_pert(n);
  parallel_for(static_cast<int>(n), config.jobs, [&](int i) {
    const auto j = static_cast<std::size_t>(i);
    const Vector x0 = set.truth[j].state(0);
    const Vector xp = x0 + perturbation(config, set.ids[j]);
    open_true[j] = rollout(model, x0, set.steps, data.dt);
    open_pert[j] = rollout(model, xp, set.steps, data.dt);
    ukf_true[j] = belief_trajectory(filter_one(config, data.spec, model, set, j, x0), set.truth[j]);
    ukf_pert[j] = belief_trajectory(filter_one(config, data.spec, model, set, j, xp), set.truth[j]);
  });
  const int dof = data.spec.dof();
  const auto pos = position_components(dof);
  const auto vel = momentum_components(dof);
  auto metrics = [&](const std::vector<Trajectory>& pred) {
    return ScenarioMetrics{rmse(pred, set.truth, pos).scalar, rmse(pred, set.truth, vel).scalar};
  };
  ModelEvaluation ev;
  ev.result.label = model.label();
  ev.result.open_true = metrics(open_true);
  ev.result.open_perturbed = metrics(open_pert);
  ev.result.ukf_true = metrics(ukf_true);
  ev.result.ukf_perturbed = metrics(ukf_pert);
  ev.open_pos = rmse(open_pert, set.truth, pos, model.label()).series;
  ev.ukf_pos = rmse(ukf_pert, set.truth, pos, model.label()).series;

  ev.energy.label = model.label();
  ev.energy.times = set.truth.front().times;
  ev.energy.values.assign(static_cast<std::size_t>(set.steps) + 1, 0.0);
  double energy_rmse = 0.0;
  for (const Trajectory& t : open_true) {
    const EnergyResult e = energy_series(data.spec, t);
    energy_rmse += e.rmse;
    for (std::size_t k = 0; k < e.series.values.size(); ++k) {
      ev.energy.values[k] += (e.series.values[k] - e.series.values.front()) / static_cast<double>(n);
    }
  }
  ev.result.energy_rmse = energy_rmse / static_cast<double>(n);
  return ev;
}

void cmd_generate(const RunConfig& config) {
  config.validate();
  log("generating " + std::to_string(config.data.count) + " " + config.data.spec.name() + " trajectories");
  const TrajectoryDataset ds = generate_dataset(config.data, config.jobs);
  ensure_dir(config.data_dir());
  write_dataset(ds, config.data_dir());
  log("wrote " + config.data_dir());
}

void cmd_train(const RunConfig& config) {
  config.validate();
  const TrajectoryDataset ds = load_data(config);
  for (int id : ds.train) {
    const double spread = relative_energy_spread(ds.spec, ds.trajectories[static_cast<std::size_t>(id)]);
    if (!(spread <= 1e-8)) {
      fail(ErrorCode::InvalidArgument, "training trajectory " + std::to_string(id) +
                                           " fails the energy sanity gate (relative spread " +
                                           io::format_double(spread) + ")");
    }
  }
  ensure_dir(config.model_dir());
  for (const ModelSpec& m : config.models) {
    log("training " + m.label());
    const TrainResult r = train(m, ds, config.train);
    save_checkpoint(r.model, checkpoint_path(config, m));
    write_history(r.history, path_in(config.model_dir(), m.label() + "_history.csv"));
    if (!r.history.val_loss.empty()) {
      log(m.label() + ": best validation loss " +
          io::format_double(r.history.val_loss[static_cast<std::size_t>(r.history.best_epoch)]) + " at epoch " +
          std::to_string(r.history.best_epoch + 1) + (r.history.pruned ? " (pruned)" : ""));
    }
  }
}

void cmd_predict(const RunConfig& config) {
  config.validate();
  const TrajectoryDataset ds = load_data(config);
  const std::vector<LearnedModel> models = load_models(config);
  const EvalSet set = eval_set(config, ds);
  ensure_dir(config.predict_dir());
  for (const LearnedModel& model : models) {
    std::vector<std::string> blocks(set.ids.size());
    parallel_for(static_cast<int>(set.ids.size()), config.jobs, [&](int i) {
      const auto j = static_cast<std::size_t>(i);
      const Vector x0 = set.truth[j].state(0);
      std::ostringstream out;
      append_states(out, set.ids[j], "true", rollout(model, x0, set.steps, ds.dt));
      append_states(out, set.ids[j], "perturbed",
                    rollout(model, x0 + perturbation(config, set.ids[j]), set.steps, ds.dt));
      blocks[j] = out.str();
    });
    std::string csv = "traj_id,scenario,step,t" + state_header(ds.spec.dof()) + "\n";
    for (const std::string& b : blocks) csv += b;
    io::write_file_atomic(path_in(config.predict_dir(), model.label() + ".csv"), csv);
    log("wrote predictions for " + model.label());
  }
}

void cmd_filter(const RunConfig& config) {
  config.validate();
  const TrajectoryDataset ds = load_data(config);
  const std::vector<LearnedModel> models = load_models(config);
  const EvalSet set = eval_set(config, ds);
  ensure_dir(config.filter_dir());
  for (const LearnedModel& model : models) {
    std::vector<std::string> blocks(set.ids.size());
    std::string header;
    parallel_for(static_cast<int>(set.ids.size()), config.jobs, [&](int i) {
      const auto j = static_cast<std::size_t>(i);
      const Vector xp = set.truth[j].state(0) + perturbation(config, set.ids[j]);
      const std::string body = filter_csv(filter_one(config, ds.spec, model, set, j, xp), ds.dt);
      std::istringstream in(body);
      std::string line;
      std::getline(in, line);
      if (j == 0) header = "traj_id," + line + "\n";
      std::ostringstream out;
      while (std::getline(in, line)) out << set.ids[j] << "," << line << "\n";
      blocks[j] = out.str();
    });
    std::string csv = header;
    for (const std::string& b : blocks) csv += b;
    io::write_file_atomic(path_in(config.filter_dir(), model.label() + ".csv"), csv);
    log("wrote filter beliefs for " + model.label());
  }
}

namespace {

std::string series_csv(const std::vector<MetricSeries>& series) {
  std::ostringstream out;
  out << "t";
  for (const MetricSeries& s : series) out << "," << s.label;
  out << "\n";
  if (series.empty()) return out.str();
  for (std::size_t k = 0; k < series.front().size(); ++k) {
    out << io::format_double(series.front().times[k]);
    for (const MetricSeries& s : series) out << "," << io::format_double(s.values[k]);
    out << "\n";
  }
  return out.str();
}

}  // namespace

void cmd_evaluate(const RunConfig& config) {
  config.validate();
  const TrajectoryDataset ds = load_data(config);
  const std::vector<LearnedModel> models = load_models(config);
  const EvalSet set = eval_set(config, ds);
  ensure_dir(config.report_dir());
  std::vector<ModelResult> results;
  std::vector<MetricSeries> open_sma, ukf_sma, energy;
  for (const LearnedModel& model : models) {
    log("evaluating " + model.label());
    const ModelEvaluation ev = evaluate_model(config, ds, set, model);
    results.push_back(ev.result);
    open_sma.push_back(sma(ev.open_pos, config.sma_window));
    open_sma.back().label = model.label();
    ukf_sma.push_back(sma(ev.ukf_pos, config.sma_window));
    ukf_sma.back().label = model.label();
    energy.push_back(ev.energy);
  }
  const ComparisonReport report = compare_report(results);
  io::write_file_atomic(path_in(config.report_dir(), "report.csv"), report.csv);
  io::write_file_atomic(path_in(config.report_dir(), "report.txt"), report.text);
  io::write_file_atomic(path_in(config.report_dir(), "sma_position_rmse_open.csv"), series_csv(open_sma));
  io::write_file_atomic(path_in(config.report_dir(), "sma_position_rmse_ukf.csv"), series_csv(ukf_sma));
  io::write_file_atomic(path_in(config.report_dir(), "energy_deviation.csv"), series_csv(energy));
  std::cout << report.text;
}

}  // namespace hamassim::pipeline
