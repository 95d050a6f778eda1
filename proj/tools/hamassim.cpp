// hamassim <generate|train|predict|filter|evaluate> --config <path>
//          [--seed N] [--jobs N] [--out DIR]

#include <CLI11.hpp>
#include <iostream>
#include <map>
#include <optional>

#include "hamassim/pipeline.hpp"

int main(int argc, char** argv) {
  using namespace hamassim;
  CLI::App app{"Hamiltonian neural networks with unscented Kalman filtering"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> out;

  const std::map<std::string, void (*)(const RunConfig&)> commands{
      {"generate", pipeline::cmd_generate}, {"train", pipeline::cmd_train},
      {"predict", pipeline::cmd_predict},   {"filter", pipeline::cmd_filter},
      {"evaluate", pipeline::cmd_evaluate},
  };
  const std::map<std::string, std::string> help{
      {"generate", "integrate the ground-truth dataset"},
      {"train", "train every configured model"},
      {"predict", "open-loop rollouts from true and perturbed initial states"},
      {"filter", "UKF runs with simulated measurements"},
      {"evaluate", "RMSE, SMA and energy tables across models"},
  };
  for (const auto& [name, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", config_path, "run configuration file")->required();
    sub->add_option("--seed", seed, "override run.seed");
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output directory");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig config = RunConfig::load(config_path);
    if (seed) {
      config.seed = *seed;
      config.data.seed = *seed;
      config.train.seed = *seed;
    }
    if (jobs) {
      config.jobs = *jobs;
      config.train.jobs = *jobs;
    }
    if (out) config.out = *out;
    config.validate();
    commands.at(app.get_subcommands().front()->get_name())(config);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::ConfigInvalid: return 2;
      case ErrorCode::MissingArtifact: return 3;
      default: return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
