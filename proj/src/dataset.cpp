#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "hamassim/io.hpp"
#include "hamassim/parallel.hpp"
#include "hamassim/training.hpp"

namespace hamassim {

Vector InitialConditionSampler::sample(const SystemSpec& spec, Rng& rng) const {
  if (spec.is_mass_spring()) {
    std::uniform_real_distribution<double> u(state_low, state_high);
    Vector x(2);
    x[0] = u(rng);
    x[1] = u(rng);
    return x;
  }
  const TwoBodyJ2& s = spec.orbit();
  std::uniform_real_distribution<double> alt(periapsis_alt_low, periapsis_alt_high);
  std::uniform_real_distribution<double> ecc(ecc_low, ecc_high);
  std::uniform_real_distribution<double> inc(inc_low_deg, inc_high_deg);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  const double r_p = s.r_eq + alt(rng);
  const double e = ecc(rng);
  const double i = inc(rng) * std::numbers::pi / 180.0;
  const double raan = angle(rng);
  const double argp = angle(rng);
  const double nu = angle(rng);
  return systems::orbit_state_from_elements(s, r_p / (1.0 - e), e, i, raan, argp, nu);
}

void DatasetConfig::validate() const {
  stepper.validate();
  if (count < 1) fail(ErrorCode::InvalidArgument, "dataset count must be >= 1");
  if (n_steps < 1 && !(periods > 0.0)) fail(ErrorCode::InvalidArgument, "dataset needs n_steps >= 1 or periods > 0");
  if (periods > 0.0 && !spec.is_orbit()) fail(ErrorCode::InvalidArgument, "periods only applies to orbits");
  if (!(train_fraction > 0.0) || val_fraction < 0.0 || train_fraction + val_fraction > 1.0) {
    fail(ErrorCode::InvalidArgument, "split fractions must satisfy 0 < train, 0 <= val, train + val <= 1");
  }
}

std::vector<Window> TrajectoryDataset::windows(std::span<const int> split, int window) const {
  std::vector<Window> out;
  for (int t : split) {
    const auto len = static_cast<int>(trajectories[static_cast<std::size_t>(t)].size());
    for (int k = 0; k + window < len; ++k) out.push_back(Window{t, k});
  }
  return out;
}

Matrix TrajectoryDataset::states(std::span<const int> split) const {
  Eigen::Index total = 0;
  for (int t : split) total += trajectories[static_cast<std::size_t>(t)].size();
  Matrix out(spec.phase_dim(), total);
  Eigen::Index col = 0;
  for (int t : split) {
    const Matrix& s = trajectories[static_cast<std::size_t>(t)].states;
    out.middleCols(col, s.cols()) = s;
    col += s.cols();
  }
  return out;
}

void assign_splits(TrajectoryDataset& ds, double train_fraction, double val_fraction) {
  const auto n = static_cast<int>(ds.trajectories.size());
  const int n_train = std::max(1, static_cast<int>(std::lround(train_fraction * n)));
  const int n_val = std::min(n - n_train, static_cast<int>(std::lround(val_fraction * n)));
  ds.train.clear();
  ds.val.clear();
  ds.test.clear();
  for (int i = 0; i < n; ++i) {
    if (i < n_train) {
      ds.train.push_back(i);
    } else if (i < n_train + n_val) {
      ds.val.push_back(i);
    } else {
      ds.test.push_back(i);
    }
  }
  ds.norm = NormalizationStats::fit(ds.states(ds.train));
}

TrajectoryDataset generate_dataset(const DatasetConfig& config, int jobs) {
  config.validate();
  TrajectoryDataset ds;
  ds.spec = config.spec;
  ds.dt = config.stepper.dt;
  ds.seed = config.seed;
  ds.trajectories.resize(static_cast<std::size_t>(config.count));

  Rng master(config.seed);
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(config.count));
  for (auto& s : seeds) s = master();

  auto make_one = [&](int index) {
    Rng rng(seeds[static_cast<std::size_t>(index)]);
    std::string last_error;
    for (int attempt = 0; attempt <= 10; ++attempt) {
      const Vector x0 = config.sampler.sample(config.spec, rng);
      int n_steps = config.n_steps;
      if (config.periods > 0.0) {
        const TwoBodyJ2& s = config.spec.orbit();
        const double r = x0.head(3).norm();
        const double v2 = x0.tail(3).squaredNorm() / (s.m * s.m);
        const double a = 1.0 / (2.0 / r - v2 / s.mu);
        n_steps = static_cast<int>(std::lround(config.periods * systems::orbital_period(s, a) / config.stepper.dt));
      }
      try {
        return integrators::propagate(config.stepper, config.spec, x0, n_steps);
      } catch (const Error& e) {
        last_error = e.what();
      }
    }
    fail(ErrorCode::NonFiniteState,
         "trajectory " + std::to_string(index) + " failed after 10 retries: " + last_error);
  };

  parallel_for(config.count, jobs, [&](int i) { ds.trajectories[static_cast<std::size_t>(i)] = make_one(i); });
  assign_splits(ds, config.train_fraction, config.val_fraction);
  return ds;
}

namespace {

using nlohmann::json;

std::string split_csv(const TrajectoryDataset& ds, std::span<const int> split) {
  const int n = ds.spec.dof();
  std::ostringstream out;
  out << "traj_id,step,t";
  for (int i = 1; i <= n; ++i) out << ",q" << i;
  for (int i = 1; i <= n; ++i) out << ",p" << i;
  out << "\n";
  for (int t : split) {
    const Trajectory& traj = ds.trajectories[static_cast<std::size_t>(t)];
    for (Eigen::Index k = 0; k < traj.size(); ++k) {
      out << t << "," << k << "," << io::format_double(traj.times[static_cast<std::size_t>(k)]);
      for (Eigen::Index d = 0; d < traj.states.rows(); ++d) out << "," << io::format_double(traj.states(d, k));
      out << "\n";
    }
  }
  return out.str();
}

json spec_to_json(const SystemSpec& spec) {
  json j;
  j["kind"] = spec.name();
  if (spec.is_mass_spring()) {
    j["k"] = spec.mass_spring().k;
    j["m"] = spec.mass_spring().m;
  } else {
    j["mu"] = spec.orbit().mu;
    j["r_eq"] = spec.orbit().r_eq;
    j["j2"] = spec.orbit().j2;
    j["m"] = spec.orbit().m;
  }
  return j;
}

SystemSpec spec_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "mass_spring") return SystemSpec(MassSpring{j.at("k").get<double>(), j.at("m").get<double>()});
  if (kind == "two_body_j2") {
    return SystemSpec(TwoBodyJ2{j.at("mu").get<double>(), j.at("r_eq").get<double>(), j.at("j2").get<double>(),
                                j.at("m").get<double>()});
  }
  fail(ErrorCode::MalformedCheckpoint, "unknown system kind '" + kind + "'");
}

// Reads one split file and appends its trajectories keyed by traj_id.
void read_split(const std::string& path, int dim, std::map<int, std::vector<std::vector<double>>>& rows) {
  std::istringstream in(io::read_file(path));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> fields;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) fields.push_back(std::stod(cell));
    if (static_cast<int>(fields.size()) != 3 + dim) fail(ErrorCode::IoError, path + ": wrong column count");
    rows[static_cast<int>(fields[0])].push_back(std::move(fields));
  }
}

}  // namespace

void write_dataset(const TrajectoryDataset& ds, const std::string& dir) {
  io::write_file_atomic(dir + "/train.csv", split_csv(ds, ds.train));
  io::write_file_atomic(dir + "/val.csv", split_csv(ds, ds.val));
  io::write_file_atomic(dir + "/test.csv", split_csv(ds, ds.test));
  json m;
  m["system"] = spec_to_json(ds.spec);
  m["dt"] = ds.dt;
  m["seed"] = ds.seed;
  m["counts"] = {{"total", ds.trajectories.size()},
                 {"train", ds.train.size()},
                 {"val", ds.val.size()},
                 {"test", ds.test.size()}};
  m["splits"] = {{"train", ds.train}, {"val", ds.val}, {"test", ds.test}};
  std::vector<double> mn(ds.norm.min.data(), ds.norm.min.data() + ds.norm.min.size());
  std::vector<double> mx(ds.norm.max.data(), ds.norm.max.data() + ds.norm.max.size());
  m["norm_min"] = mn;
  m["norm_max"] = mx;
  io::write_file_atomic(dir + "/manifest.json", m.dump(1) + "\n");
}

TrajectoryDataset read_dataset(const std::string& dir) {
  json m;
  try {
    m = json::parse(io::read_file(dir + "/manifest.json"));
  } catch (const json::exception& e) {
    fail(ErrorCode::IoError, "manifest.json: " + std::string(e.what()));
  }
  TrajectoryDataset ds;
  ds.spec = spec_from_json(m.at("system"));
  ds.dt = m.at("dt").get<double>();
  ds.seed = m.at("seed").get<std::uint64_t>();
  ds.train = m.at("splits").at("train").get<std::vector<int>>();
  ds.val = m.at("splits").at("val").get<std::vector<int>>();
  ds.test = m.at("splits").at("test").get<std::vector<int>>();
  const auto total = m.at("counts").at("total").get<std::size_t>();
  ds.trajectories.resize(total);
  const int dim = ds.spec.phase_dim();
  std::map<int, std::vector<std::vector<double>>> rows;
  for (const char* name : {"train", "val", "test"}) read_split(dir + "/" + name + ".csv", dim, rows);
  for (auto& [id, r] : rows) {
    if (id < 0 || static_cast<std::size_t>(id) >= total) fail(ErrorCode::IoError, "trajectory id out of range");
    Trajectory& traj = ds.trajectories[static_cast<std::size_t>(id)];
    traj.states.resize(dim, static_cast<Eigen::Index>(r.size()));
    traj.times.resize(r.size());
    for (std::size_t k = 0; k < r.size(); ++k) {
      traj.times[k] = r[k][2];
      for (int d = 0; d < dim; ++d) traj.states(d, static_cast<Eigen::Index>(k)) = r[k][3 + static_cast<std::size_t>(d)];
    }
  }
  ds.norm = NormalizationStats{Eigen::Map<const Vector>(m.at("norm_min").get<std::vector<double>>().data(), dim),
                               Eigen::Map<const Vector>(m.at("norm_max").get<std::vector<double>>().data(), dim)};
  return ds;
}

}  // namespace hamassim
