#include <cmath>
#include <string>

#include "hamassim/training.hpp"

namespace hamassim {

double huber(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

double huber_derivative(double r, double delta) {
  if (std::abs(r) <= delta) return r;
  return r > 0.0 ? delta : -delta;
}

double huber(const Vector& residual, double delta) {
  if (!(delta > 0.0)) fail(ErrorCode::InvalidArgument, "huber delta must be positive");
  double total = 0.0;
  for (Eigen::Index i = 0; i < residual.size(); ++i) total += huber(residual[i], delta);
  return total;
}

double loss_one_step(const Predictor& predictor, const Vector& xk, const Vector& xk1, double delta) {
  const Vector pred = predictor.step(xk);
  if (!pred.allFinite()) fail(ErrorCode::NonFiniteState, "one-step prediction is not finite");
  return huber(Vector(pred - xk1), delta);
}

double loss_ahnn(const Predictor& predictor, const Vector& xk, std::span<const Vector> targets, double delta) {
  if (targets.empty()) fail(ErrorCode::InvalidArgument, "loss_ahnn needs at least one target");
  double total = 0.0;
  Vector x = xk;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    x = predictor.step(x);
    if (!x.allFinite()) fail(ErrorCode::NonFiniteState, "autoregressive step " + std::to_string(i + 1) + " is not finite");
    total += huber(Vector(x - targets[i]), delta);
  }
  return total / static_cast<double>(targets.size());
}

}  // namespace hamassim
