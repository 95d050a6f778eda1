#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "hamassim/io.hpp"
#include "hamassim/parallel.hpp"
#include "hamassim/training.hpp"

namespace hamassim {
namespace {

// Column chunk for gradient accumulation. Fixed so that the summation order
// does not depend on the number of worker threads.
constexpr Eigen::Index kChunk = 64;

struct FieldCache {
  MlpCache mlp;
  MlpGradCache grad;
};

struct StepCache {
  MlpCache direct;
  std::vector<std::array<FieldCache, 4>> stages;
};

Matrix field_forward(const LearnedModel& m, const Matrix& x, FieldCache& c) {
  if (m.kind() == ModelKind::NODE) return m.field_scale() * mlp::forward(m.net(), x, &c.mlp);
  return apply_coupled_symplectic(m.coupling(), mlp::input_gradient(m.net(), x, &c.grad));
}

Matrix field_backward(const LearnedModel& m, const FieldCache& c, const Matrix& fbar, Eigen::Ref<Vector> grad) {
  if (m.kind() == ModelKind::NODE) return mlp::backward(m.net(), c.mlp, m.field_scale() * fbar, grad);
  // f = M g with M antisymmetric  =>  gbar = M^T fbar = -M fbar
  const Matrix gbar = -apply_coupled_symplectic(m.coupling(), fbar);
  return mlp::input_gradient_backward(m.net(), c.grad, gbar, grad);
}

Matrix step_forward(const LearnedModel& m, const Matrix& x0, StepCache& c) {
  if (m.kind() == ModelKind::MLP) return mlp::forward(m.net(), x0, &c.direct);
  const double h = 1.0 / m.substeps();
  c.stages.resize(static_cast<std::size_t>(m.substeps()));
  Matrix x = x0;
  for (int s = 0; s < m.substeps(); ++s) {
    auto& st = c.stages[static_cast<std::size_t>(s)];
    const Matrix k1 = field_forward(m, x, st[0]);
    const Matrix k2 = field_forward(m, x + 0.5 * h * k1, st[1]);
    const Matrix k3 = field_forward(m, x + 0.5 * h * k2, st[2]);
    const Matrix k4 = field_forward(m, x + h * k3, st[3]);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

Matrix step_backward(const LearnedModel& m, const StepCache& c, const Matrix& ybar, Eigen::Ref<Vector> grad) {
  if (m.kind() == ModelKind::MLP) return mlp::backward(m.net(), c.direct, ybar, grad);
  const double h = 1.0 / m.substeps();
  Matrix xbar = ybar;
  for (int s = m.substeps() - 1; s >= 0; --s) {
    const auto& st = c.stages[static_cast<std::size_t>(s)];
    const Matrix out_bar = xbar;
    Matrix k1bar = (h / 6.0) * out_bar;
    Matrix k2bar = (h / 3.0) * out_bar;
    Matrix k3bar = (h / 3.0) * out_bar;
    const Matrix k4bar = (h / 6.0) * out_bar;
    const Matrix s4 = field_backward(m, st[3], k4bar, grad);
    xbar += s4;
    k3bar += h * s4;
    const Matrix s3 = field_backward(m, st[2], k3bar, grad);
    xbar += s3;
    k2bar += 0.5 * h * s3;
    const Matrix s2 = field_backward(m, st[1], k2bar, grad);
    xbar += s2;
    k1bar += 0.5 * h * s2;
    xbar += field_backward(m, st[0], k1bar, grad);
  }
  return xbar;
}

// Loss sum over one chunk of columns; gradient scaled by `scale`.
double chunk_loss(const LearnedModel& m, const Matrix& x0, std::span<const Matrix> targets, Eigen::Index col,
                  Eigen::Index cols, double delta, double scale, Vector* grad) {
  const auto w = targets.size();
  std::vector<StepCache> caches(grad != nullptr ? w : 0);
  std::vector<Matrix> residual(w);
  Matrix x = x0.middleCols(col, cols);
  double total = 0.0;
  for (std::size_t i = 0; i < w; ++i) {
    x = grad != nullptr ? step_forward(m, x, caches[i]) : m.step_normalized(x);
    residual[i] = x - targets[i].middleCols(col, cols);
    for (Eigen::Index j = 0; j < residual[i].size(); ++j) total += huber(residual[i].data()[j], delta);
  }
  if (grad == nullptr) return total;
  Matrix xbar = Matrix::Zero(x0.rows(), cols);
  for (std::size_t i = w; i-- > 0;) {
    xbar += residual[i].unaryExpr([delta, scale](double r) { return scale * huber_derivative(r, delta); });
    xbar = step_backward(m, caches[i], xbar, *grad);
  }
  return total;
}

}  // namespace

std::string ModelSpec::label() const {
  if (kind == ModelKind::AHNN) return "AHNN_" + std::to_string(window);
  return to_string(kind);
}

void TrainConfig::validate() const {
  if (batch_size < 1) fail(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  if (epochs < 0) fail(ErrorCode::InvalidArgument, "epochs must be >= 0");
  if (!(lr_inf > 0.0) || !(lr_inf <= lr0)) fail(ErrorCode::InvalidArgument, "need 0 < lr_inf <= lr0");
  if (!(huber_delta > 0.0)) fail(ErrorCode::InvalidArgument, "huber_delta must be positive");
  if (pruner && (pruner->fit_epochs < 2 || pruner->horizon < 1)) {
    fail(ErrorCode::InvalidArgument, "pruner needs fit_epochs >= 2 and horizon >= 1");
  }
}

BatchLoss batch_loss(const LearnedModel& model, const Matrix& x0, std::span<const Matrix> targets, double delta,
                     bool with_grad, int jobs) {
  if (targets.empty()) fail(ErrorCode::InvalidArgument, "batch_loss needs at least one target step");
  const Eigen::Index batch = x0.cols();
  const auto w = static_cast<double>(targets.size());
  const double scale = 1.0 / (static_cast<double>(batch) * w);
  const Eigen::Index chunks = (batch + kChunk - 1) / kChunk;
  const Eigen::Index p = model.net().parameter_count();

  std::vector<double> losses(static_cast<std::size_t>(chunks), 0.0);
  std::vector<Vector> grads(with_grad ? static_cast<std::size_t>(chunks) : 0, Vector::Zero(p));
  auto run_chunk = [&](Eigen::Index c) {
    const Eigen::Index col = c * kChunk;
    const Eigen::Index cols = std::min(kChunk, batch - col);
    losses[static_cast<std::size_t>(c)] = chunk_loss(model, x0, targets, col, cols, delta, scale,
                                                     with_grad ? &grads[static_cast<std::size_t>(c)] : nullptr);
  };

  parallel_for(static_cast<int>(chunks), jobs, [&](int c) { run_chunk(c); });

  BatchLoss out;
  double total = 0.0;
  for (double l : losses) total += l;
  out.loss = total * scale;
  if (with_grad) {
    out.grad = Vector::Zero(p);
    for (const Vector& g : grads) out.grad += g;
  }
  return out;
}

BatchLoss tape_loss(const LearnedModel& model, const Vector& x0, std::span<const Vector> targets, double delta) {
  const MlpParams& net = model.net();
  ad::Tape tape;
  std::vector<ad::Var> theta;
  theta.reserve(static_cast<std::size_t>(net.parameter_count()));
  for (Eigen::Index i = 0; i < net.parameter_count(); ++i) theta.push_back(tape.input(net.theta[i]));
  const std::span<const ad::Var> th(theta);
  const auto dim = static_cast<std::size_t>(x0.size());

  auto field = [&](const std::vector<ad::Var>& x) {
    if (model.kind() == ModelKind::NODE) {
      std::vector<ad::Var> f = mlp::forward_generic<ad::Var>(net.layer_sizes, th, x);
      for (ad::Var& v : f) v = model.field_scale() * v;
      return f;
    }
    const std::vector<ad::Var> g = mlp::input_gradient_generic<ad::Var>(net.layer_sizes, th, x);
    const std::size_t n = dim / 2;
    std::vector<ad::Var> f(dim);
    const Vector& w = model.coupling();
    for (std::size_t i = 0; i < n; ++i) {
      const double wi = w[static_cast<Eigen::Index>(i)];
      f[i] = wi * g[n + i];
      f[n + i] = -wi * g[i];
    }
    return f;
  };
  auto axpy = [](const std::vector<ad::Var>& x, double a, const std::vector<ad::Var>& k) {
    std::vector<ad::Var> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + a * k[i];
    return out;
  };
  auto step = [&](std::vector<ad::Var> x) {
    if (model.kind() == ModelKind::MLP) return mlp::forward_generic<ad::Var>(net.layer_sizes, th, x);
    const double h = 1.0 / model.substeps();
    for (int s = 0; s < model.substeps(); ++s) {
      const auto k1 = field(x);
      const auto k2 = field(axpy(x, 0.5 * h, k1));
      const auto k3 = field(axpy(x, 0.5 * h, k2));
      const auto k4 = field(axpy(x, h, k3));
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = x[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return x;
  };

  std::vector<ad::Var> x(x0.data(), x0.data() + x0.size());
  ad::Var total(0.0);
  for (const Vector& target : targets) {
    x = step(std::move(x));
    for (std::size_t i = 0; i < dim; ++i) {
      const ad::Var r = x[i] - target[static_cast<Eigen::Index>(i)];
      const ad::Var a = r.value() >= 0.0 ? r : -r;
      total = total + (a.value() <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta));
    }
  }
  const ad::Var loss = total / static_cast<double>(targets.size());
  return BatchLoss{loss.value(), tape.gradient(loss)};
}

namespace {

// Gathers windows into x0 and the W target matrices.
void gather(const std::vector<Matrix>& normalized, std::span<const Window> windows, int w, Matrix& x0,
            std::vector<Matrix>& targets) {
  const Eigen::Index dim = normalized.front().rows();
  const auto b = static_cast<Eigen::Index>(windows.size());
  x0.resize(dim, b);
  targets.assign(static_cast<std::size_t>(w), Matrix(dim, b));
  for (Eigen::Index j = 0; j < b; ++j) {
    const Window& win = windows[static_cast<std::size_t>(j)];
    const Matrix& s = normalized[static_cast<std::size_t>(win.trajectory)];
    x0.col(j) = s.col(win.start);
    for (int i = 0; i < w; ++i) targets[static_cast<std::size_t>(i)].col(j) = s.col(win.start + i + 1);
  }
}

double mean_loss(const LearnedModel& model, const std::vector<Matrix>& normalized, const std::vector<Window>& windows,
                 int w, const TrainConfig& config) {
  double total = 0.0;
  Matrix x0;
  std::vector<Matrix> targets;
  const auto n = windows.size();
  const auto bs = static_cast<std::size_t>(std::max(config.batch_size, 1024));
  for (std::size_t start = 0; start < n; start += bs) {
    const std::size_t len = std::min(bs, n - start);
    gather(normalized, std::span<const Window>(windows).subspan(start, len), w, x0, targets);
    total += batch_loss(model, x0, targets, config.huber_delta, false, config.jobs).loss * static_cast<double>(len);
  }
  return total / static_cast<double>(n);
}

}  // namespace

TrainResult train_model(LearnedModel model, const TrajectoryDataset& data, const TrainConfig& config) {
  config.validate();
  TrainResult result{model, {}};
  if (config.epochs == 0) return result;

  const int w = model.window();
  std::vector<Matrix> normalized;
  normalized.reserve(data.trajectories.size());
  for (const Trajectory& t : data.trajectories) normalized.push_back(model.norm().normalize(t.states));

  std::vector<Window> train_windows = data.windows(data.train, w);
  const std::vector<Window> val_windows = data.windows(data.val, w);
  if (train_windows.empty()) fail(ErrorCode::InvalidArgument, "no training windows of length " + std::to_string(w));

  const ExpDecaySchedule schedule(config.lr0, config.lr_inf, config.epochs);
  Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  AdamWState opt;
  double best = std::numeric_limits<double>::infinity();
  Matrix x0;
  std::vector<Matrix> targets;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = schedule.lr(epoch);
    std::shuffle(train_windows.begin(), train_windows.end(), shuffle_rng);
    double epoch_total = 0.0;
    const auto n = train_windows.size();
    const auto bs = static_cast<std::size_t>(config.batch_size);
    for (std::size_t start = 0, batch = 0; start < n; start += bs, ++batch) {
      const std::size_t len = std::min(bs, n - start);
      gather(normalized, std::span<const Window>(train_windows).subspan(start, len), w, x0, targets);
      const BatchLoss bl = batch_loss(model, x0, targets, config.huber_delta, true, config.jobs);
      if (!std::isfinite(bl.loss) || !bl.grad.allFinite()) {
        fail(ErrorCode::NonFiniteLoss, model.label() + ": epoch " + std::to_string(epoch) + ", batch " +
                                           std::to_string(batch) + " produced a non-finite loss");
      }
      adamw_step(model.net().theta, bl.grad, opt, config.adamw, lr);
      epoch_total += bl.loss * static_cast<double>(len);
    }
    const double train_loss = epoch_total / static_cast<double>(n);
    const double val_loss = val_windows.empty() ? train_loss : mean_loss(model, normalized, val_windows, w, config);
    if (!std::isfinite(val_loss)) {
      fail(ErrorCode::NonFiniteLoss, model.label() + ": validation loss is not finite at epoch " + std::to_string(epoch));
    }
    result.history.train_loss.push_back(train_loss);
    result.history.val_loss.push_back(val_loss);
    result.history.lr.push_back(lr);
    if (val_loss < best) {
      best = val_loss;
      result.model = model;
      result.history.best_epoch = epoch;
    }
    if (config.pruner && epoch + 1 == config.pruner->fit_epochs &&
        pfl_prune(result.history.val_loss, config.pruner->horizon, config.pruner->threshold) == PruneDecision::Stop) {
      result.history.pruned = true;
      break;
    }
  }
  return result;
}

TrainResult train(const ModelSpec& spec, const TrajectoryDataset& data, const TrainConfig& config) {
  config.validate();
  Rng rng(config.seed);
  LearnedModel model =
      LearnedModel::create(spec.kind, data.spec.phase_dim(), spec.hidden, data.norm, data.dt, spec.window, rng);
  if (spec.substeps != 1 || spec.field_scale != 1.0) {
    model = LearnedModel(spec.kind, model.net(), model.norm(), model.dt(), model.window(), spec.substeps,
                         spec.field_scale);
  }
  model.seed = config.seed;
  model.system = data.spec.name();
  return train_model(std::move(model), data, config);
}

void write_history(const TrainHistory& history, const std::string& path) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,lr\n";
  for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
    out << e << "," << io::format_double(history.train_loss[e]) << "," << io::format_double(history.val_loss[e]) << ","
        << io::format_double(history.lr[e]) << "\n";
  }
  io::write_file_atomic(path, out.str());
}

}  // namespace hamassim
