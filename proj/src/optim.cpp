#include <algorithm>
#include <cmath>
#include <limits>

#include "hamassim/training.hpp"

namespace hamassim {

void adamw_step(Vector& params, const Vector& grads, AdamWState& state, const AdamWConfig& config, double lr) {
  if (grads.size() != params.size()) fail(ErrorCode::ShapeMismatch, "adamw: gradient and parameter sizes differ");
  if (state.step == 0) {
    state.m = Vector::Zero(params.size());
    state.v = Vector::Zero(params.size());
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    fail(ErrorCode::ShapeMismatch, "adamw: optimizer state does not match the parameters");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  params *= 1.0 - lr * config.weight_decay;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + config.eps);
  }
}

ExpDecaySchedule::ExpDecaySchedule(double lr0, double lr_inf, int epochs)
    : lr0_(lr0), lr_inf_(lr_inf), tau_(std::max(1, epochs) / 5.0) {
  if (!(lr_inf > 0.0) || !(lr_inf <= lr0)) fail(ErrorCode::InvalidArgument, "schedule needs 0 < lr_inf <= lr0");
}

double ExpDecaySchedule::lr(int epoch) const { return lr_inf_ + (lr0_ - lr_inf_) * std::exp(-epoch / tau_); }

namespace {

struct ExpFit {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double sse = std::numeric_limits<double>::infinity();
  bool ok = false;
};

// For fixed decay rate b the model is linear in (a, c); solve that least
// squares problem in closed form.
ExpFit fit_linear_part(std::span<const double> y, double b, bool with_offset) {
  double suu = 0.0, su = 0.0, suy = 0.0, sy = 0.0;
  const auto n = static_cast<double>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double u = std::exp(-b * static_cast<double>(i + 1));
    suu += u * u;
    su += u;
    suy += u * y[i];
    sy += y[i];
  }
  ExpFit f;
  f.b = b;
  if (with_offset) {
    const double det = suu * n - su * su;
    if (!(std::abs(det) > 1e-12 * std::max(1.0, suu * n))) return f;
    f.a = (suy * n - su * sy) / det;
    f.c = (suu * sy - su * suy) / det;
  } else {
    if (!(suu > 0.0)) return f;
    f.a = suy / suu;
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = f.a * std::exp(-b * static_cast<double>(i + 1)) + f.c - y[i];
    sse += r * r;
  }
  f.sse = sse;
  f.ok = std::isfinite(sse);
  return f;
}

ExpFit fit_exponential(std::span<const double> y, bool with_offset, double b_lo, double b_hi) {
  // Coarse scan over b, then golden-section refinement around the best cell.
  constexpr int kGrid = 400;
  ExpFit best;
  int best_i = -1;
  for (int i = 0; i <= kGrid; ++i) {
    const double b = b_lo + (b_hi - b_lo) * i / kGrid;
    const ExpFit f = fit_linear_part(y, b, with_offset);
    if (f.ok && f.sse < best.sse) {
      best = f;
      best_i = i;
    }
  }
  if (best_i < 0) return best;
  double lo = b_lo + (b_hi - b_lo) * std::max(0, best_i - 1) / kGrid;
  double hi = b_lo + (b_hi - b_lo) * std::min(kGrid, best_i + 1) / kGrid;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto sse_at = [&](double b) {
    const ExpFit f = fit_linear_part(y, b, with_offset);
    return f.ok ? f.sse : std::numeric_limits<double>::infinity();
  };
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = sse_at(x1), f2 = sse_at(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = sse_at(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = sse_at(x2);
    }
  }
  const ExpFit refined = fit_linear_part(y, 0.5 * (lo + hi), with_offset);
  return refined.ok && refined.sse <= best.sse ? refined : best;
}

}  // namespace

std::optional<double> pfl_forecast(std::span<const double> losses, int horizon) {
  if (losses.size() < 2) return std::nullopt;
  for (double l : losses) {
    if (!std::isfinite(l) || !(l > 0.0)) return std::nullopt;
  }
  const double first = losses.front();
  bool flat = true;
  for (double l : losses) flat = flat && l == first;
  if (flat) return first;

  const ExpFit with_c = fit_exponential(losses, true, 1e-6, 5.0);
  ExpFit chosen = with_c;
  if (!with_c.ok) chosen = fit_exponential(losses, false, -1.0, 5.0);
  if (!chosen.ok) return std::nullopt;
  const double pred = chosen.a * std::exp(-chosen.b * horizon) + chosen.c;
  if (!std::isfinite(pred)) return std::nullopt;
  return pred;
}

PruneDecision pfl_prune(std::span<const double> losses, int horizon, double threshold) {
  const std::optional<double> pred = pfl_forecast(losses, horizon);
  if (!pred) return PruneDecision::Continue;
  return *pred > threshold ? PruneDecision::Stop : PruneDecision::Continue;
}

}  // namespace hamassim
