#include "hamassim/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "hamassim/io.hpp"

namespace hamassim {

void MetricSeries::validate() const {
  if (times.size() != values.size()) fail(ErrorCode::InvalidArgument, "series '" + label + "' has unequal lengths");
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "series '" + label + "' has a non-finite value");
  }
}

std::vector<int> position_components(int dof) {
  std::vector<int> c(static_cast<std::size_t>(dof));
  for (int i = 0; i < dof; ++i) c[static_cast<std::size_t>(i)] = i;
  return c;
}

std::vector<int> momentum_components(int dof) {
  std::vector<int> c(static_cast<std::size_t>(dof));
  for (int i = 0; i < dof; ++i) c[static_cast<std::size_t>(i)] = dof + i;
  return c;
}

RmseResult rmse(std::span<const Trajectory> predicted, std::span<const Trajectory> truth,
                std::span<const int> components, const std::string& label) {
  if (predicted.size() != truth.size() || predicted.empty()) {
    fail(ErrorCode::GridMismatch, "rmse needs the same non-zero number of predicted and true trajectories");
  }
  if (components.empty()) fail(ErrorCode::InvalidArgument, "rmse needs at least one component");
  const Trajectory& ref = truth.front();
  const Eigen::Index steps = ref.size();
  for (std::size_t j = 0; j < truth.size(); ++j) {
    for (const Trajectory* t : {&predicted[j], &truth[j]}) {
      if (t->size() != steps || t->states.rows() != ref.states.rows()) {
        fail(ErrorCode::GridMismatch, "trajectory " + std::to_string(j) + " has a different shape");
      }
      for (Eigen::Index k = 0; k < steps; ++k) {
        if (std::abs(t->times[static_cast<std::size_t>(k)] - ref.times[static_cast<std::size_t>(k)]) >
            1e-9 * std::max(1.0, std::abs(ref.times[static_cast<std::size_t>(k)]))) {
          fail(ErrorCode::GridMismatch,
               "trajectory " + std::to_string(j) + " is off the time grid at step " + std::to_string(k));
        }
      }
    }
  }
  for (int c : components) {
    if (c < 0 || c >= ref.states.rows()) fail(ErrorCode::InvalidArgument, "component index out of range");
  }

  RmseResult out;
  out.series.label = label;
  out.series.times = ref.times;
  out.series.values.resize(static_cast<std::size_t>(steps));
  const double per_step = static_cast<double>(truth.size() * components.size());
  double total = 0.0;
  for (Eigen::Index k = 0; k < steps; ++k) {
    double sq = 0.0;
    for (std::size_t j = 0; j < truth.size(); ++j) {
      for (int c : components) {
        const double e = predicted[j].states(c, k) - truth[j].states(c, k);
        sq += e * e;
      }
    }
    total += sq;
    out.series.values[static_cast<std::size_t>(k)] = std::sqrt(sq / per_step);
  }
  out.scalar = std::sqrt(total / (per_step * static_cast<double>(steps)));
  return out;
}

MetricSeries sma(const MetricSeries& series, int n) {
  if (n < 1) fail(ErrorCode::InvalidArgument, "sma window must be >= 1");
  MetricSeries out;
  out.times = series.times;
  out.label = series.label + "_sma" + std::to_string(n);
  out.values.resize(series.values.size());
  const std::size_t w = static_cast<std::size_t>(n);
  for (std::size_t k = 0; k < series.values.size(); ++k) {
    const std::size_t lo = k + 1 >= w ? k + 1 - w : 0;
    double s = 0.0;
    for (std::size_t i = lo; i <= k; ++i) s += series.values[i];
    out.values[k] = s / static_cast<double>(k + 1 - lo);
  }
  return out;
}

namespace {

template <class F>
EnergyResult energy_along(const Trajectory& trajectory, const std::string& label, F&& energy) {
  EnergyResult out;
  out.series.label = label;
  out.series.times = trajectory.times;
  out.series.values.resize(static_cast<std::size_t>(trajectory.size()));
  for (Eigen::Index k = 0; k < trajectory.size(); ++k) {
    const Vector x = trajectory.state(k);
    if (!x.allFinite()) fail(ErrorCode::NonFiniteState, "trajectory state " + std::to_string(k) + " is not finite");
    out.series.values[static_cast<std::size_t>(k)] = energy(x);
  }
  if (out.series.values.empty()) return out;
  const double h0 = out.series.values.front();
  double sq = 0.0;
  for (double v : out.series.values) sq += (v - h0) * (v - h0);
  out.rmse = std::sqrt(sq / static_cast<double>(out.series.values.size()));
  return out;
}

}  // namespace

EnergyResult energy_series(const SystemSpec& spec, const Trajectory& trajectory) {
  return energy_along(trajectory, "energy", [&](const Vector& x) { return systems::hamiltonian(spec, x); });
}

EnergyResult energy_series(const LearnedModel& model, const Trajectory& trajectory) {
  if (!model.is_hamiltonian()) fail(ErrorCode::InvalidArgument, model.label() + " has no learned energy");
  return energy_along(trajectory, "learned_energy", [&](const Vector& x) { return model.energy(x); });
}

double relative_energy_spread(const SystemSpec& spec, const Trajectory& trajectory) {
  const EnergyResult e = energy_series(spec, trajectory);
  if (e.series.values.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(e.series.values.begin(), e.series.values.end());
  return (*hi - *lo) / std::abs(e.series.values.front());
}

namespace {

// Position of a label in the expected accuracy chain, best first.
int chain_rank(const std::string& label) {
  if (label.rfind("AHNN", 0) == 0) return 0;
  if (label == "HNN") return 1;
  if (label == "NODE") return 2;
  if (label == "MLP") return 3;
  return -1;
}

std::string cell(double v) { return std::isnan(v) ? std::string() : io::format_double(v); }

std::string text_cell(double v) {
  if (std::isnan(v)) return "-";
  std::ostringstream s;
  s << std::scientific << std::setprecision(4) << v;
  return s.str();
}

}  // namespace

ComparisonReport compare_report(std::span<const ModelResult> results) {
  // Worst open-loop RMSE per chain rank, then per-row check against
  // the next weaker rank present.
  std::vector<double> level(4, std::numeric_limits<double>::quiet_NaN());
  for (const ModelResult& r : results) {
    const int k = chain_rank(r.label);
    const double v = r.open_true.pos_rmse;
    if (k < 0 || std::isnan(v)) continue;
    if (std::isnan(level[static_cast<std::size_t>(k)]) || v > level[static_cast<std::size_t>(k)]) {
      level[static_cast<std::size_t>(k)] = v;
    }
  }
  ComparisonReport out;
  auto row_flag = [&](const ModelResult& r) -> std::string {
    const int k = chain_rank(r.label);
    if (k < 0 || std::isnan(r.open_true.pos_rmse)) return "";
    for (int j = k + 1; j < 4; ++j) {
      const double next = level[static_cast<std::size_t>(j)];
      if (!std::isnan(next)) {
        const bool ok = r.open_true.pos_rmse <= next;
        if (!ok) out.ordering_held = false;
        return ok ? "1" : "0";
      }
    }
    return "";
  };

  std::ostringstream csv;
  csv << "model,open_true_pos,open_true_vel,open_perturbed_pos,open_perturbed_vel,ukf_true_pos,ukf_true_vel,"
         "ukf_perturbed_pos,ukf_perturbed_vel,energy_rmse,ordering_ok\n";
  std::ostringstream text;
  text << std::left << std::setw(10) << "model";
  for (const char* h : {"open/true", "open/pert", "ukf/true", "ukf/pert"}) {
    text << std::setw(24) << (std::string(h) + " pos|vel");
  }
  text << std::setw(12) << "energy" << "order\n";
  for (const ModelResult& r : results) {
    const std::string flag = row_flag(r);
    csv << r.label;
    text << std::left << std::setw(10) << r.label;
    for (const ScenarioMetrics* m : {&r.open_true, &r.open_perturbed, &r.ukf_true, &r.ukf_perturbed}) {
      csv << "," << cell(m->pos_rmse) << "," << cell(m->vel_rmse);
      text << std::setw(24) << (text_cell(m->pos_rmse) + "|" + text_cell(m->vel_rmse));
    }
    csv << "," << cell(r.energy_rmse) << "," << flag << "\n";
    text << std::setw(12) << text_cell(r.energy_rmse) << (flag.empty() ? "-" : flag) << "\n";
  }
  text << "ordering AHNN_W <= HNN <= NODE <= MLP: " << (out.ordering_held ? "held" : "violated") << "\n";
  out.csv = csv.str();
  out.text = text.str();
  return out;
}

}  // namespace hamassim
