#include "hamassim/ukf.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "hamassim/io.hpp"

namespace hamassim {

void GaussianBelief::validate() const {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    fail(ErrorCode::DimensionMismatch, "belief covariance does not match the mean");
  }
  if (!mean.allFinite() || !cov.allFinite()) fail(ErrorCode::NonFiniteState, "belief is not finite");
  linalg::cholesky_lower(cov);
}

void UtConfig::validate(int dim) const {
  if (!(alpha > 0.0)) fail(ErrorCode::InvalidArgument, "UT alpha must be positive");
  if (dim + lambda(dim) == 0.0) fail(ErrorCode::InvalidArgument, "UT parameters give L + lambda = 0");
}

SigmaPointSet make_sigma_points(const GaussianBelief& belief, const UtConfig& ut) {
  const int n = belief.dim();
  ut.validate(n);
  const double lambda = ut.lambda(n);
  const double spread = n + lambda;
  if (!(spread > 0.0)) fail(ErrorCode::NegativeScaledCov, "L + lambda = " + std::to_string(spread) + " <= 0");
  const Matrix root = linalg::cholesky_lower(spread * belief.cov);

  SigmaPointSet s;
  s.points.resize(n, 2 * n + 1);
  s.points.col(0) = belief.mean;
  for (int i = 0; i < n; ++i) {
    s.points.col(1 + i) = belief.mean + root.col(i);
    s.points.col(1 + n + i) = belief.mean - root.col(i);
  }
  s.w_mean = Vector::Constant(2 * n + 1, 1.0 / (2.0 * spread));
  s.w_cov = s.w_mean;
  s.w_mean[0] = lambda / spread;
  s.w_cov[0] = lambda / spread + (1.0 - ut.alpha * ut.alpha + ut.beta);
  return s;
}

namespace {

// Weighted mean written around the central point; with sum(w) = 1 this equals
// sum(w_i x_i) but avoids cancellation when w_0 is large and negative.
Vector weighted_mean(const Matrix& pts, const Vector& w) {
  Vector dev = Vector::Zero(pts.rows());
  for (Eigen::Index i = 1; i < pts.cols(); ++i) dev += w[i] * (pts.col(i) - pts.col(0));
  return pts.col(0) + dev;
}

Matrix weighted_cross(const Matrix& a, const Vector& a_mean, const Matrix& b, const Vector& b_mean, const Vector& w) {
  Matrix c = Matrix::Zero(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.cols(); ++i) c += w[i] * (a.col(i) - a_mean) * (b.col(i) - b_mean).transpose();
  return c;
}

}  // namespace

UtPrediction ut_predict(const SigmaPointSet& points, const Predictor& predictor, const Matrix& process_noise) {
  const int n = points.dim();
  if (predictor.state_dim() != n) fail(ErrorCode::DimensionMismatch, "predictor dimension differs from the belief");
  if (process_noise.rows() != n || process_noise.cols() != n) {
    fail(ErrorCode::DimensionMismatch, "process noise must be L x L");
  }
  UtPrediction out;
  out.propagated = points;
  for (Eigen::Index i = 0; i < points.count(); ++i) {
    Vector x;
    try {
      x = predictor.step(points.points.col(i));
    } catch (const Error& e) {
      throw Error(ErrorCode::NonFiniteState, "sigma point " + std::to_string(i) + ": " + e.what());
    }
    if (!x.allFinite()) fail(ErrorCode::NonFiniteState, "sigma point " + std::to_string(i) + " diverged");
    out.propagated.points.col(i) = x;
  }
  const Matrix& pts = out.propagated.points;
  out.belief.mean = weighted_mean(pts, points.w_mean);
  const Matrix cov = weighted_cross(pts, out.belief.mean, pts, out.belief.mean, points.w_cov) + process_noise;
  out.belief.cov = linalg::symmetrize(cov);
  return out;
}

GaussianBelief ut_update(const GaussianBelief& prior, const SigmaPointSet& propagated, const ObservationSpec& obs,
                         const Vector& y) {
  if (y.size() != obs.output_dim()) fail(ErrorCode::DimensionMismatch, "measurement has the wrong length");
  if (obs.state_dim() != prior.dim()) fail(ErrorCode::DimensionMismatch, "observation model does not fit the state");
  const Matrix ys = obs.h * propagated.points;
  const Vector y_mean = weighted_mean(ys, propagated.w_mean);
  // Covariance carried by the prior but not by the propagated points
  // (the additive process noise). Exact for a linear observation model.
  const Matrix extra =
      prior.cov - weighted_cross(propagated.points, prior.mean, propagated.points, prior.mean, propagated.w_cov);
  const Matrix pyy = linalg::symmetrize(weighted_cross(ys, y_mean, ys, y_mean, propagated.w_cov) +
                                        obs.h * extra * obs.h.transpose() + obs.noise_cov);
  const Matrix pxy =
      weighted_cross(propagated.points, prior.mean, ys, y_mean, propagated.w_cov) + extra * obs.h.transpose();

  // K = Pxy Pyy^-1, solved as Pyy K^T = Pxy^T.
  const Matrix gain = linalg::solve_spd(pyy, Matrix(pxy.transpose())).transpose();
  GaussianBelief post;
  post.mean = prior.mean + gain * (y - y_mean);
  post.cov = linalg::symmetrize(prior.cov - gain * pyy * gain.transpose());
  try {
    linalg::cholesky_lower(post.cov);
  } catch (const Error&) {
    post.cov += 1e-12 * Matrix::Identity(prior.dim(), prior.dim());
    try {
      linalg::cholesky_lower(post.cov);
    } catch (const Error& e) {
      fail(ErrorCode::CovarianceCollapse, std::string("posterior covariance lost definiteness: ") + e.what());
    }
  }
  return post;
}

void UkfConfig::validate(int dim) const {
  ut.validate(dim);
  if (update_every < 1) fail(ErrorCode::InvalidArgument, "update_every must be >= 1");
  if (process_noise.rows() != dim || process_noise.cols() != dim) {
    fail(ErrorCode::DimensionMismatch, "process noise must be L x L");
  }
  if (obs.state_dim() != dim) fail(ErrorCode::DimensionMismatch, "observation model does not fit the state");
}

std::vector<Measurement> simulate_measurements(const Trajectory& truth, const ObservationSpec& obs, int update_every,
                                               Rng& rng) {
  if (update_every < 1) fail(ErrorCode::InvalidArgument, "update_every must be >= 1");
  std::vector<Measurement> out;
  for (Eigen::Index k = update_every; k < truth.size(); k += update_every) {
    out.push_back(Measurement{static_cast<int>(k), observe(obs, truth.state(k), rng)});
  }
  return out;
}

std::vector<FilterStep> run_filter(const Predictor& predictor, const UkfConfig& config, const GaussianBelief& belief0,
                                   std::span<const Measurement> measurements, int n_steps) {
  config.validate(belief0.dim());
  belief0.validate();
  if (n_steps < 1) fail(ErrorCode::InvalidArgument, "run_filter needs n_steps >= 1");
  std::vector<const Measurement*> at_step(static_cast<std::size_t>(n_steps) + 1, nullptr);
  for (const Measurement& m : measurements) {
    if (m.step < 1 || m.step > n_steps || m.step % config.update_every != 0) {
      fail(ErrorCode::InvalidArgument, "measurement at step " + std::to_string(m.step) + " is off the update grid");
    }
    at_step[static_cast<std::size_t>(m.step)] = &m;
  }

  std::vector<FilterStep> out;
  out.reserve(static_cast<std::size_t>(n_steps) + 1);
  out.push_back(FilterStep{belief0, false});
  GaussianBelief belief = belief0;
  for (int k = 1; k <= n_steps; ++k) {
    try {
      const SigmaPointSet sp = make_sigma_points(belief, config.ut);
      UtPrediction pred = ut_predict(sp, predictor, config.process_noise);
      const Measurement* m = at_step[static_cast<std::size_t>(k)];
      if (m != nullptr) {
        belief = ut_update(pred.belief, pred.propagated, config.obs, m->y);
      } else {
        belief = std::move(pred.belief);
      }
      out.push_back(FilterStep{belief, m != nullptr});
    } catch (const Error& e) {
      throw Error(e.code(), "filter step " + std::to_string(k) + ": " + e.what());
    }
  }
  return out;
}

UtGridResult ut_grid_search(const Predictor& predictor, const UkfConfig& base, const GaussianBelief& belief0,
                            const Trajectory& truth, std::span<const Measurement> measurements,
                            std::span<const double> alphas, std::span<const double> betas,
                            std::span<const double> kappas) {
  if (alphas.empty() || betas.empty() || kappas.empty()) fail(ErrorCode::InvalidArgument, "empty search grid");
  const int n_steps = static_cast<int>(truth.size()) - 1;
  UtGridResult out;
  out.best_rmse = std::numeric_limits<double>::infinity();
  bool found = false;
  for (double a : alphas) {
    for (double b : betas) {
      for (double k : kappas) {
        UkfConfig cfg = base;
        cfg.ut = UtConfig{a, b, k};
        double score = std::numeric_limits<double>::infinity();
        try {
          const auto steps = run_filter(predictor, cfg, belief0, measurements, n_steps);
          double sq = 0.0;
          for (std::size_t s = 0; s < steps.size(); ++s) {
            sq += (steps[s].belief.mean - truth.state(static_cast<Eigen::Index>(s))).squaredNorm();
          }
          score = std::sqrt(sq / static_cast<double>(steps.size() * static_cast<std::size_t>(belief0.dim())));
        } catch (const Error&) {
        }
        out.evaluated.emplace_back(cfg.ut, score);
        if (!found || score < out.best_rmse) {
          out.best = cfg.ut;
          out.best_rmse = score;
          found = true;
        }
      }
    }
  }
  return out;
}

std::string filter_csv(const std::vector<FilterStep>& steps, double dt) {
  std::ostringstream out;
  if (steps.empty()) return "t\n";
  const int n = steps.front().belief.dim();
  out << "t";
  for (int i = 0; i < n; ++i) out << ",mean" << i + 1;
  for (int i = 0; i < n; ++i) out << ",var" << i + 1;
  for (int i = 0; i < n; ++i) out << ",lo2s" << i + 1 << ",hi2s" << i + 1;
  out << ",updated\n";
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const GaussianBelief& b = steps[k].belief;
    out << io::format_double(static_cast<double>(k) * dt);
    for (int i = 0; i < n; ++i) out << "," << io::format_double(b.mean[i]);
    for (int i = 0; i < n; ++i) out << "," << io::format_double(b.cov(i, i));
    for (int i = 0; i < n; ++i) {
      const double s = 2.0 * std::sqrt(std::max(0.0, b.cov(i, i)));
      out << "," << io::format_double(b.mean[i] - s) << "," << io::format_double(b.mean[i] + s);
    }
    out << "," << (steps[k].updated ? 1 : 0) << "\n";
  }
  return out.str();
}

}  // namespace hamassim
