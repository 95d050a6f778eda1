#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hamassim/training.hpp"
#include "hamassim/ukf.hpp"

namespace hamassim {

struct FilterSettings {
  UtConfig ut;
  int update_every = 60;
  Vector p0_diag;             // initial covariance, also the perturbation law
  Vector process_noise_diag;  // additive, per state
  ObservationKind measurement = ObservationKind::PositionOnly;
  Vector measurement_noise_diag;  // per measured component
  int trajectories = 0;           // test trajectories used; 0 = all
  int steps = 0;                  // prediction horizon; 0 = full trajectory

  UkfConfig ukf(const SystemSpec& spec) const;
  Matrix p0() const;
};

/// Everything one pipeline run needs. Parsed from TOML-style text:
/// `[section]` headers, `key = value` lines, `#` or `;` comments, lists as
/// comma-separated values with optional brackets.
struct RunConfig {
  std::uint64_t seed = 7;
  int jobs = 1;
  std::string out = "out";
  DatasetConfig data;
  std::vector<ModelSpec> models;
  TrainConfig train;
  FilterSettings filter;
  int sma_window = 240;

  /// Defaults for the named system ("mass_spring" or "two_body_j2").
  static RunConfig defaults(const std::string& system);
  /// Throws ConfigInvalid naming the offending field.
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  /// Re-checks every numeric constraint; throws ConfigInvalid.
  void validate() const;

  std::string data_dir() const;
  std::string model_dir() const;
  std::string predict_dir() const;
  std::string filter_dir() const;
  std::string report_dir() const;
};

/// "MLP", "NODE", "HNN", "AHNN_5" (or "AHNN" with the given window).
ModelSpec parse_model_label(const std::string& label, int default_window = 5);

}  // namespace hamassim
