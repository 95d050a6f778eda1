#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hamassim/config.hpp"
#include "hamassim/error.hpp"
#include "hamassim/io.hpp"

using namespace hamassim;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HAMASSIM_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hamassim_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string tiny_config(const fs::path& out) {
  return "[run]\nseed = 7\nout = \"" + out.string() +
         "\"\n"
         "[system]\nkind = \"mass_spring\"\n"
         "[data]\ncount = 20\nn_steps = 120\n"
         "[model]\nkinds = [\"MLP\", \"HNN\", \"AHNN_5\"]\nhidden = [8, 8]\n"
         "[train]\nepochs = 2\nbatch_size = 64\n"
         "[filter]\nupdate_every = 30\n"
         "[eval]\nsma_window = 10\n";
}

void expect_config_error(const std::string& text, const std::string& needle) {
  try {
    RunConfig::parse(text);
    FAIL() << "accepted: " << text;
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigInvalid);
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(Config, MassSpringDefaults) {
  const RunConfig c = RunConfig::parse("[system]\nkind = mass_spring\n");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.data.count, 2500);
  EXPECT_EQ(c.data.n_steps, 1000);
  EXPECT_EQ(c.data.stepper.dt, 0.01);
  EXPECT_EQ(c.train.batch_size, 256);
  EXPECT_EQ(c.train.epochs, 250);
  EXPECT_EQ(c.train.adamw.weight_decay, 0.01);
  EXPECT_EQ(c.filter.update_every, 60);
  EXPECT_EQ(c.filter.p0(), 1e-7 * Matrix::Identity(2, 2));
  ASSERT_EQ(c.models.size(), 4u);
  EXPECT_EQ(c.models[3].label(), "AHNN_5");
  EXPECT_EQ(c.models[3].field_scale, 2e-2);
  EXPECT_EQ(c.sma_window, 240);
}

TEST(Config, OrbitDefaults) {
  const RunConfig c = RunConfig::parse("[system]\nkind = two_body_j2\n");
  EXPECT_EQ(c.data.spec.phase_dim(), 6);
  EXPECT_EQ(c.filter.p0().rows(), 6);
  EXPECT_GT(c.data.periods, 0.0);
  EXPECT_EQ(c.models.front().field_scale, 5e-3);
  EXPECT_EQ(RunConfig::parse("[system]\nkind = two_body_j2\n[model]\nfield_scale = 0.5\n").models.back().field_scale, 0.5);
}

TEST(Config, Overrides) {
  const RunConfig c = RunConfig::parse(
      "# comment\n[run]\nseed = 201 ; trailing\njobs = 2\nout = \"x/y\"\n"
      "[system]\nkind = \"mass_spring\"\nk = 4\nm = 2\n"
      "[data]\nstepper = leapfrog\ndt = 0.005\ncount = 10\n"
      "[model]\nkinds = [HNN, AHNN_3, NODE]\nhidden = [32]\n"
      "[train]\nlr0 = 0.01\nlr_inf = 0.0001\npruner = true\npruner_threshold = 0.5\n"
      "[filter]\nalpha = 0.5\nmeasurement = full\nmeasurement_noise = [1e-4, 2e-4]\n");
  EXPECT_EQ(c.seed, 201u);
  EXPECT_EQ(c.jobs, 2);
  EXPECT_EQ(c.out, "x/y");
  EXPECT_EQ(c.model_dir(), "x/y/models");
  EXPECT_EQ(c.data.stepper.dt, 0.005);
  EXPECT_EQ(c.data.count, 10);
  ASSERT_EQ(c.models.size(), 3u);
  EXPECT_EQ(c.models[1].kind, ModelKind::AHNN);
  EXPECT_EQ(c.models[1].window, 3);
  EXPECT_EQ(c.models[2].hidden, std::vector<int>{32});
  EXPECT_EQ(c.train.lr0, 0.01);
  ASSERT_TRUE(c.train.pruner.has_value());
  EXPECT_EQ(c.train.pruner->threshold, 0.5);
  EXPECT_EQ(c.filter.ut.alpha, 0.5);
  EXPECT_EQ(c.filter.measurement, ObservationKind::FullState);
  EXPECT_EQ(c.filter.ukf(c.data.spec).obs.output_dim(), 2);
}

TEST(Config, Rejections) {
  expect_config_error("[system]\nkind = pendulum\n", "kind");
  expect_config_error("[system]\nkind = mass_spring\n[data]\ncolour = 3\n", "data.colour");
  expect_config_error("[system]\nkind = mass_spring\n[train]\nepochs = many\n", "train.epochs");
  expect_config_error("[system]\nkind = mass_spring\n[train]\nlr0 = 1e-5\nlr_inf = 1e-3\n", "lr");
  expect_config_error("[system]\nkind = mass_spring\n[filter]\np0 = [1, 2, 3]\n", "p0");
  expect_config_error("[system]\nkind = mass_spring\n[model]\nkinds = [RNN]\n", "RNN");
  expect_config_error("[system]\nkind = mass_spring\n[bogus]\nx = 1\n", "bogus");
  expect_config_error("[system]\nkind = mass_spring\n[data]\ncount = 0\n", "count");
  expect_config_error("[system]\nkind = mass_spring\n[model]\nfield_scale = 0\n", "field_scale");
}

TEST(Config, ModelLabels) {
  EXPECT_EQ(parse_model_label("AHNN_7").window, 7);
  EXPECT_EQ(parse_model_label("AHNN", 4).window, 4);
  EXPECT_EQ(parse_model_label("NODE").kind, ModelKind::NODE);
  EXPECT_THROW(parse_model_label("AHNN_x"), Error);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("codes");
  EXPECT_NE(run_cli(""), 0);
  EXPECT_EQ(run_cli("--help"), 0);
  io::write_file_atomic((dir / "bad.toml").string(), "[system]\nkind = mass_spring\n[data]\nnope = 1\n");
  EXPECT_EQ(run_cli("generate --config " + (dir / "bad.toml").string()), 2);
  EXPECT_EQ(run_cli("generate --config " + (dir / "absent.toml").string()), 3);
  io::write_file_atomic((dir / "ok.toml").string(), tiny_config(dir / "out"));
  EXPECT_EQ(run_cli("train --config " + (dir / "ok.toml").string()), 3);
  EXPECT_EQ(run_cli("evaluate --config " + (dir / "ok.toml").string()), 3);
  fs::remove_all(dir);
}

TEST(Cli, PipelineIsDeterministic) {
  const fs::path dir = scratch("pipeline");
  std::string reports[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path out = dir / ("run" + std::to_string(run));
    const std::string cfg = (dir / ("run" + std::to_string(run) + ".toml")).string();
    io::write_file_atomic(cfg, tiny_config(out));
    for (const char* cmd : {"generate", "train", "predict", "filter", "evaluate"}) {
      ASSERT_EQ(run_cli(std::string(cmd) + " --config " + cfg), 0) << cmd;
    }
    reports[run] = io::read_file((out / "report" / "report.csv").string());
    for (const char* f : {"data/manifest.json", "models/HNN.json", "models/AHNN_5_history.csv", "predict/MLP.csv",
                          "filter/AHNN_5.csv", "report/report.txt", "report/sma_position_rmse_ukf.csv",
                          "report/energy_deviation.csv"}) {
      EXPECT_TRUE(fs::exists(out / f)) << f;
    }
  }
  EXPECT_EQ(reports[0], reports[1]);
  EXPECT_NE(reports[0].find("\nAHNN_5,"), std::string::npos);
  EXPECT_NE(reports[0].find("\nMLP,"), std::string::npos);
  EXPECT_EQ(std::count(reports[0].begin(), reports[0].end(), '\n'), 4);

  // Overrides on the command line win over the file.
  const std::string cfg = (dir / "run0.toml").string();
  const fs::path other = dir / "seeded";
  ASSERT_EQ(run_cli("generate --config " + cfg + " --seed 201 --jobs 2 --out " + other.string()), 0);
  EXPECT_NE(io::read_file((other / "data" / "manifest.json").string()),
            io::read_file((dir / "run0" / "data" / "manifest.json").string()));
  fs::remove_all(dir);
}

TEST(Config, ShippedConfigsLoad) {
  int count = 0;
  for (const auto& entry : fs::directory_iterator(HAMASSIM_CONFIG_DIR)) {
    if (entry.path().extension() != ".toml") continue;
    EXPECT_NO_THROW(RunConfig::load(entry.path().string()).validate()) << entry.path();
    ++count;
  }
  EXPECT_GE(count, 3);
}
