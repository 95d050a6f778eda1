#include "hamassim/config.hpp"

#include <cmath>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <algorithm>
#include <charconv>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "hamassim/io.hpp"

namespace hamassim {

namespace pt = boost::property_tree;

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& msg) {
  fail(ErrorCode::ConfigInvalid, field + ": " + msg);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

// Strips comments and quotes so the text reads as plain INI.
std::string to_ini(const std::string& text) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    bool quoted = false;
    char q = 0;
    std::size_t cut = line.size();
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == q) quoted = false;
      } else if (c == '"' || c == '\'') {
        quoted = true;
        q = c;
      } else if (c == '#' || c == ';') {
        cut = i;
        break;
      }
    }
    line = trim(line.substr(0, cut));
    const auto eq = line.find('=');
    if (eq != std::string::npos) line = trim(line.substr(0, eq)) + "=" + unquote(trim(line.substr(eq + 1)));
    out << line << "\n";
  }
  return out.str();
}

double to_double(const std::string& field, const std::string& s) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) invalid(field, "expected a number, got '" + s + "'");
  return v;
}

long long to_int(const std::string& field, const std::string& s) {
  const std::string t = trim(s);
  long long v = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) {
    invalid(field, "expected an integer, got '" + s + "'");
  }
  return v;
}

std::vector<std::string> to_list(const std::string& s) {
  std::string t = trim(s);
  if (!t.empty() && t.front() == '[') {
    if (t.back() != ']') return {t};
    t = t.substr(1, t.size() - 2);
  }
  std::vector<std::string> out;
  std::istringstream in(t);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = unquote(trim(item));
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool to_bool(const std::string& field, const std::string& s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  invalid(field, "expected a boolean, got '" + s + "'");
}

// Reads keys out of the tree and remembers which ones were consumed so that
// unknown keys can be rejected.
class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  const pt::ptree* section(const std::string& name) {
    const auto it = tree_.find(name);
    return it == tree_.not_found() ? nullptr : &it->second;
  }

  template <class F>
  void get(const std::string& sec, const std::string& key, F&& apply) {
    const pt::ptree* s = section(sec);
    if (s == nullptr) return;
    const auto it = s->find(key);
    if (it == s->not_found()) return;
    used_.insert(sec + "." + key);
    apply(sec + "." + key, it->second.data());
  }

  void num(const std::string& sec, const std::string& key, double& v) {
    get(sec, key, [&](const std::string& f, const std::string& s) { v = to_double(f, s); });
  }
  template <class I>
  void integer(const std::string& sec, const std::string& key, I& v) {
    get(sec, key, [&](const std::string& f, const std::string& s) {
      const long long x = to_int(f, s);
      if constexpr (std::is_unsigned_v<I>) {
        if (x < 0) invalid(f, "must be non-negative");
      }
      v = static_cast<I>(x);
    });
  }
  void text(const std::string& sec, const std::string& key, std::string& v) {
    get(sec, key, [&](const std::string&, const std::string& s) { v = trim(s); });
  }
  void vec(const std::string& sec, const std::string& key, Vector& v) {
    get(sec, key, [&](const std::string& f, const std::string& s) {
      const auto items = to_list(s);
      v.resize(static_cast<Eigen::Index>(items.size()));
      for (std::size_t i = 0; i < items.size(); ++i) v[static_cast<Eigen::Index>(i)] = to_double(f, items[i]);
    });
  }

  void reject_unknown() const {
    for (const auto& [sec, body] : tree_) {
      if (!body.data().empty() && body.empty()) invalid(sec, "key outside of any section");
      for (const auto& [key, value] : body) {
        if (used_.count(sec + "." + key) == 0) invalid(sec + "." + key, "unknown key");
      }
    }
  }

 private:
  const pt::ptree& tree_;
  std::set<std::string> used_;
};

StepperSpec parse_stepper(const std::string& name, double dt, int substeps) {
  if (name == "rk4") return StepperSpec::rk4(dt, substeps);
  if (name == "gl4") return StepperSpec::gl4(dt, substeps);
  if (name == "leapfrog") return StepperSpec::leapfrog(dt, substeps);
  if (name == "kahan_li8") return StepperSpec::kahan_li8(dt, substeps);
  invalid("data.stepper", "unknown stepper '" + name + "' (rk4, gl4, leapfrog, kahan_li8)");
}

std::string stepper_name(const StepperSpec& s) {
  switch (s.kind) {
    case StepperKind::RK4: return "rk4";
    case StepperKind::GL4: return "gl4";
    case StepperKind::SymplecticComposition: return s.coefficients.size() == 1 ? "leapfrog" : "kahan_li8";
  }
  return "rk4";
}

Vector diag_fill(int n, double v) { return Vector::Constant(n, v); }

}  // namespace

ModelSpec parse_model_label(const std::string& label, int default_window) {
  ModelSpec m;
  const std::string l = trim(label);
  try {
    if (l.rfind("AHNN", 0) == 0) {
      m.kind = ModelKind::AHNN;
      m.window = default_window;
      if (l.size() > 4) {
        if (l[4] != '_') invalid("model.kinds", "bad label '" + l + "'");
        m.window = static_cast<int>(to_int("model.kinds", l.substr(5)));
      }
    } else {
      m.kind = model_kind_from_string(l);
      m.window = 1;
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) throw;
    invalid("model.kinds", "unknown model '" + l + "' (MLP, NODE, HNN, AHNN_W)");
  }
  if (m.window < 1) invalid("model.kinds", "window must be >= 1 in '" + l + "'");
  return m;
}

Matrix FilterSettings::p0() const { return p0_diag.asDiagonal(); }

UkfConfig FilterSettings::ukf(const SystemSpec& spec) const {
  UkfConfig c;
  c.ut = ut;
  c.update_every = update_every;
  c.process_noise = process_noise_diag.asDiagonal();
  const Matrix r = measurement_noise_diag.asDiagonal();
  c.obs = measurement == ObservationKind::FullState ? ObservationSpec::full_state(spec.dof(), r)
                                                     : ObservationSpec::position_only(spec.dof(), r);
  return c;
}

RunConfig RunConfig::defaults(const std::string& system) {
  RunConfig c;
  c.models = {parse_model_label("MLP"), parse_model_label("NODE"), parse_model_label("HNN"),
              parse_model_label("AHNN_5")};
  if (system == "mass_spring") {
    c.data.spec = MassSpring{};
    c.data.stepper = StepperSpec::gl4(0.01);
    c.data.count = 2500;
    c.data.n_steps = 1000;
    c.filter.p0_diag = diag_fill(2, 1e-7);
    c.filter.process_noise_diag = diag_fill(2, 1e-12);
    c.filter.measurement_noise_diag = diag_fill(1, 1e-8);
    for (ModelSpec& m : c.models) m.field_scale = 2e-2;
  } else if (system == "two_body_j2") {
    c.data.spec = TwoBodyJ2{};
    c.data.stepper = StepperSpec::kahan_li8(60.0, 6);
    c.data.count = 2500;
    c.data.n_steps = 0;
    c.data.periods = 2.0;
    Vector p0(6);
    p0 << 10, 10, 10, 1e-3, 1e-3, 1e-3;
    c.filter.p0_diag = p0;
    c.filter.process_noise_diag = diag_fill(6, 1e-10);
    c.filter.measurement_noise_diag = diag_fill(3, 1e-2);
    for (ModelSpec& m : c.models) m.field_scale = 5e-3;
  } else {
    invalid("system.kind", "unknown system '" + system + "' (mass_spring, two_body_j2)");
  }
  c.data.seed = c.seed;
  c.train.seed = c.seed;
  return c;
}

RunConfig RunConfig::parse(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(to_ini(text));
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCode::ConfigInvalid, std::string("line ") + std::to_string(e.line()) + ": " + e.message());
  }
  Reader r(tree);
  std::string system = "mass_spring";
  r.text("system", "kind", system);
  RunConfig c = defaults(system);

  r.integer("run", "seed", c.seed);
  r.integer("run", "jobs", c.jobs);
  r.text("run", "out", c.out);

  if (c.data.spec.is_mass_spring()) {
    MassSpring s = c.data.spec.mass_spring();
    r.num("system", "k", s.k);
    r.num("system", "m", s.m);
    c.data.spec = s;
  } else {
    TwoBodyJ2 s = c.data.spec.orbit();
    r.num("system", "mu", s.mu);
    r.num("system", "r_eq", s.r_eq);
    r.num("system", "j2", s.j2);
    r.num("system", "m", s.m);
    c.data.spec = s;
  }

  double dt = c.data.stepper.dt;
  int substeps = c.data.stepper.substeps;
  std::string stepper = stepper_name(c.data.stepper);
  integrators::Gl4Options gl4 = c.data.stepper.gl4_options;
  r.num("data", "dt", dt);
  r.integer("data", "substeps", substeps);
  r.text("data", "stepper", stepper);
  r.num("data", "fp_tol", gl4.fp_tol);
  r.integer("data", "fp_max_iter", gl4.fp_max_iter);
  c.data.stepper = parse_stepper(stepper, dt, substeps);
  c.data.stepper.gl4_options = gl4;
  r.integer("data", "count", c.data.count);
  r.integer("data", "n_steps", c.data.n_steps);
  r.num("data", "periods", c.data.periods);
  r.num("data", "train_fraction", c.data.train_fraction);
  r.num("data", "val_fraction", c.data.val_fraction);
  InitialConditionSampler& smp = c.data.sampler;
  r.num("data", "state_low", smp.state_low);
  r.num("data", "state_high", smp.state_high);
  r.num("data", "periapsis_alt_low", smp.periapsis_alt_low);
  r.num("data", "periapsis_alt_high", smp.periapsis_alt_high);
  r.num("data", "ecc_low", smp.ecc_low);
  r.num("data", "ecc_high", smp.ecc_high);
  r.num("data", "inc_low_deg", smp.inc_low_deg);
  r.num("data", "inc_high_deg", smp.inc_high_deg);

  int window = 5;
  r.integer("model", "window", window);
  std::vector<int> hidden = c.models.front().hidden;
  int model_substeps = 1;
  double field_scale = c.models.front().field_scale;
  r.get("model", "hidden", [&](const std::string& f, const std::string& s) {
    hidden.clear();
    for (const auto& item : to_list(s)) hidden.push_back(static_cast<int>(to_int(f, item)));
  });
  r.integer("model", "substeps", model_substeps);
  r.num("model", "field_scale", field_scale);
  r.get("model", "kinds", [&](const std::string&, const std::string& s) {
    c.models.clear();
    for (const auto& item : to_list(s)) c.models.push_back(parse_model_label(item, window));
  });
  for (ModelSpec& m : c.models) {
    m.hidden = hidden;
    m.substeps = model_substeps;
    m.field_scale = field_scale;
  }

  TrainConfig& t = c.train;
  r.integer("train", "batch_size", t.batch_size);
  r.integer("train", "epochs", t.epochs);
  r.num("train", "lr0", t.lr0);
  r.num("train", "lr_inf", t.lr_inf);
  r.num("train", "beta1", t.adamw.beta1);
  r.num("train", "beta2", t.adamw.beta2);
  r.num("train", "eps", t.adamw.eps);
  r.num("train", "weight_decay", t.adamw.weight_decay);
  r.num("train", "huber_delta", t.huber_delta);
  bool pruner = false;
  PrunerConfig pc;
  r.get("train", "pruner", [&](const std::string& f, const std::string& s) { pruner = to_bool(f, s); });
  r.integer("train", "pruner_fit_epochs", pc.fit_epochs);
  r.integer("train", "pruner_horizon", pc.horizon);
  r.num("train", "pruner_threshold", pc.threshold);
  if (pruner) t.pruner = pc;

  FilterSettings& fs = c.filter;
  r.num("filter", "alpha", fs.ut.alpha);
  r.num("filter", "beta", fs.ut.beta);
  r.num("filter", "kappa", fs.ut.kappa);
  r.integer("filter", "update_every", fs.update_every);
  r.vec("filter", "p0", fs.p0_diag);
  r.vec("filter", "process_noise", fs.process_noise_diag);
  r.vec("filter", "measurement_noise", fs.measurement_noise_diag);
  r.get("filter", "measurement", [&](const std::string& f, const std::string& s) {
    const std::string v = trim(s);
    if (v == "position") {
      fs.measurement = ObservationKind::PositionOnly;
    } else if (v == "full") {
      fs.measurement = ObservationKind::FullState;
    } else {
      invalid(f, "expected 'position' or 'full', got '" + v + "'");
    }
  });
  r.integer("filter", "trajectories", fs.trajectories);
  r.integer("filter", "steps", fs.steps);
  r.integer("eval", "sma_window", c.sma_window);

  r.reject_unknown();

  // The run seed drives data and training unless overridden per section.
  c.data.seed = c.seed;
  c.train.seed = c.seed;
  r.integer("data", "seed", c.data.seed);
  r.integer("train", "seed", c.train.seed);
  c.train.jobs = c.jobs;
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  return parse(io::read_file(path));
}

void RunConfig::validate() const {
  auto wrap = [](const std::string& field, auto&& check) {
    try {
      check();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ConfigInvalid) throw;
      invalid(field, e.what());
    }
  };
  if (jobs < 1) invalid("run.jobs", "must be >= 1");
  if (out.empty()) invalid("run.out", "must not be empty");
  wrap("data", [&] { data.validate(); });
  if (models.empty()) invalid("model.kinds", "at least one model is required");
  for (const ModelSpec& m : models) {
    if (m.hidden.empty()) invalid("model.hidden", "at least one hidden layer is required");
    for (int h : m.hidden) {
      if (h < 1) invalid("model.hidden", "layer widths must be >= 1");
    }
    if (m.substeps < 1) invalid("model.substeps", "must be >= 1");
    if (!(m.field_scale > 0.0) || !std::isfinite(m.field_scale)) invalid("model.field_scale", "must be positive");
  }
  wrap("train", [&] { train.validate(); });
  const int n = data.spec.phase_dim();
  const int n_obs = filter.measurement == ObservationKind::FullState ? n : data.spec.dof();
  if (filter.p0_diag.size() != n) invalid("filter.p0", "needs " + std::to_string(n) + " entries");
  if (filter.process_noise_diag.size() != n) {
    invalid("filter.process_noise", "needs " + std::to_string(n) + " entries");
  }
  if (filter.measurement_noise_diag.size() != n_obs) {
    invalid("filter.measurement_noise", "needs " + std::to_string(n_obs) + " entries");
  }
  if ((filter.p0_diag.array() <= 0.0).any() || !filter.p0_diag.allFinite()) {
    invalid("filter.p0", "entries must be positive");
  }
  if ((filter.process_noise_diag.array() < 0.0).any() || !filter.process_noise_diag.allFinite()) {
    invalid("filter.process_noise", "entries must be non-negative");
  }
  if ((filter.measurement_noise_diag.array() < 0.0).any() || !filter.measurement_noise_diag.allFinite()) {
    invalid("filter.measurement_noise", "entries must be non-negative");
  }
  wrap("filter", [&] { filter.ut.validate(n); });
  if (filter.update_every < 1) invalid("filter.update_every", "must be >= 1");
  if (filter.trajectories < 0) invalid("filter.trajectories", "must be >= 0");
  if (filter.steps < 0) invalid("filter.steps", "must be >= 0");
  if (sma_window < 1) invalid("eval.sma_window", "must be >= 1");
}

std::string RunConfig::data_dir() const { return (std::filesystem::path(out) / "data").string(); }
std::string RunConfig::model_dir() const { return (std::filesystem::path(out) / "models").string(); }
std::string RunConfig::predict_dir() const { return (std::filesystem::path(out) / "predict").string(); }
std::string RunConfig::filter_dir() const { return (std::filesystem::path(out) / "filter").string(); }
std::string RunConfig::report_dir() const { return (std::filesystem::path(out) / "report").string(); }

}  // namespace hamassim
