#include "hamassim/mlp.hpp"

#include <string>

namespace hamassim {

Eigen::Index mlp_parameter_count(const std::vector<int>& layer_sizes) {
  Eigen::Index count = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    count += static_cast<Eigen::Index>(layer_sizes[l]) * layer_sizes[l + 1] + layer_sizes[l + 1];
  }
  return count;
}

MlpParams MlpParams::zeros(std::vector<int> layer_sizes) {
  MlpParams p;
  p.layer_sizes = std::move(layer_sizes);
  p.theta = Vector::Zero(mlp_parameter_count(p.layer_sizes));
  p.validate();
  return p;
}

MlpParams MlpParams::glorot(std::vector<int> layer_sizes, Rng& rng) {
  MlpParams p = zeros(std::move(layer_sizes));
  for (int l = 0; l < p.num_layers(); ++l) {
    const int fan_in = p.layer_sizes[static_cast<std::size_t>(l)];
    const int fan_out = p.layer_sizes[static_cast<std::size_t>(l) + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto w = p.weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
    }
  }
  return p;
}

Eigen::Index MlpParams::weight_offset(int layer) const {
  Eigen::Index offset = 0;
  for (int l = 0; l < layer; ++l) {
    offset += static_cast<Eigen::Index>(layer_sizes[static_cast<std::size_t>(l)]) *
                  layer_sizes[static_cast<std::size_t>(l) + 1] +
              layer_sizes[static_cast<std::size_t>(l) + 1];
  }
  return offset;
}

Eigen::Index MlpParams::bias_offset(int layer) const {
  return weight_offset(layer) + static_cast<Eigen::Index>(layer_sizes[static_cast<std::size_t>(layer)]) *
                                    layer_sizes[static_cast<std::size_t>(layer) + 1];
}

Eigen::Map<const Matrix> MlpParams::weight(int layer) const {
  return {theta.data() + weight_offset(layer), layer_sizes[static_cast<std::size_t>(layer) + 1],
          layer_sizes[static_cast<std::size_t>(layer)]};
}

Eigen::Map<const Vector> MlpParams::bias(int layer) const {
  return {theta.data() + bias_offset(layer), layer_sizes[static_cast<std::size_t>(layer) + 1]};
}

Eigen::Map<Matrix> MlpParams::weight(int layer) {
  return {theta.data() + weight_offset(layer), layer_sizes[static_cast<std::size_t>(layer) + 1],
          layer_sizes[static_cast<std::size_t>(layer)]};
}

Eigen::Map<Vector> MlpParams::bias(int layer) {
  return {theta.data() + bias_offset(layer), layer_sizes[static_cast<std::size_t>(layer) + 1]};
}

void MlpParams::validate() const {
  if (layer_sizes.size() < 2) fail(ErrorCode::InvalidArgument, "network needs at least input and output sizes");
  for (int s : layer_sizes) {
    if (s < 1) fail(ErrorCode::InvalidArgument, "layer sizes must be positive");
  }
  if (theta.size() != mlp_parameter_count(layer_sizes)) {
    fail(ErrorCode::ShapeMismatch, "parameter vector has " + std::to_string(theta.size()) + " entries, layers need " +
                                       std::to_string(mlp_parameter_count(layer_sizes)));
  }
  if (!theta.allFinite()) fail(ErrorCode::NonFiniteValue, "network parameters are not finite");
}

namespace mlp {
namespace {

void require_input(const MlpParams& params, Eigen::Index rows) {
  if (rows != params.input_dim()) {
    fail(ErrorCode::DimensionMismatch, "network input has " + std::to_string(rows) + " rows, expected " +
                                           std::to_string(params.input_dim()));
  }
}

}  // namespace

Matrix forward(const MlpParams& params, const Matrix& x, MlpCache* cache) {
  require_input(params, x.rows());
  const int layers = params.num_layers();
  if (cache != nullptr) {
    cache->h.clear();
    cache->h.push_back(x);
  }
  Matrix h = x;
  for (int l = 0; l < layers; ++l) {
    Matrix a = params.weight(l) * h;
    a.colwise() += params.bias(l);
    if (l + 1 < layers) {
      h = a.array().tanh().matrix();
      if (cache != nullptr) cache->h.push_back(h);
    } else {
      h = std::move(a);
    }
  }
  return h;
}

Vector forward(const MlpParams& params, const Vector& x) {
  Matrix y = forward(params, Matrix(x), nullptr);
  return y.col(0);
}

Matrix backward(const MlpParams& params, const MlpCache& cache, const Matrix& ybar, Eigen::Ref<Vector> grad) {
  const int layers = params.num_layers();
  Matrix abar = ybar;
  for (int l = layers - 1; l >= 0; --l) {
    const Matrix& hin = cache.h[static_cast<std::size_t>(l)];
    Eigen::Map<Matrix> gw(grad.data() + params.weight_offset(l), params.weight(l).rows(), params.weight(l).cols());
    Eigen::Map<Vector> gb(grad.data() + params.bias_offset(l), params.bias(l).size());
    gw.noalias() += abar * hin.transpose();
    gb += abar.rowwise().sum();
    Matrix hbar = params.weight(l).transpose() * abar;
    if (l == 0) return hbar;
    abar = hbar.array() * (1.0 - hin.array().square());
  }
  return abar;
}

Matrix input_gradient(const MlpParams& params, const Matrix& x, MlpGradCache* cache) {
  require_input(params, x.rows());
  if (params.output_dim() != 1) fail(ErrorCode::DimensionMismatch, "input_gradient needs a scalar-output network");
  const int layers = params.num_layers();
  const Eigen::Index batch = x.cols();

  MlpGradCache local;
  MlpGradCache& c = cache != nullptr ? *cache : local;
  c.h.assign(1, x);
  for (int l = 0; l + 1 < layers; ++l) {
    Matrix a = params.weight(l) * c.h.back();
    a.colwise() += params.bias(l);
    c.h.push_back(a.array().tanh().matrix());
  }
  c.g.assign(static_cast<std::size_t>(layers), Matrix());
  // g[L-1] is the output weight row broadcast over the batch.
  c.g[static_cast<std::size_t>(layers - 1)] = params.weight(layers - 1).transpose().replicate(1, batch);
  for (int l = layers - 2; l >= 0; --l) {
    const Matrix& hl = c.h[static_cast<std::size_t>(l) + 1];
    const Matrix d = c.g[static_cast<std::size_t>(l) + 1].cwiseProduct((1.0 - hl.array().square()).matrix());
    c.g[static_cast<std::size_t>(l)] = params.weight(l).transpose() * d;
  }
  return c.g[0];
}

Matrix input_gradient_backward(const MlpParams& params, const MlpGradCache& cache, const Matrix& gbar,
                               Eigen::Ref<Vector> grad) {
  const int layers = params.num_layers();
  const Eigen::Index batch = gbar.cols();
  auto weight_grad = [&](int l) {
    return Eigen::Map<Matrix>(grad.data() + params.weight_offset(l), params.weight(l).rows(), params.weight(l).cols());
  };
  auto bias_grad = [&](int l) { return Eigen::Map<Vector>(grad.data() + params.bias_offset(l), params.bias(l).size()); };

  // hbar[l] collects adjoints of hidden activations h_l, l = 1..L-1.
  std::vector<Matrix> hbar(static_cast<std::size_t>(layers));
  Matrix gbar_l = gbar;  // adjoint of g[l], starting at l = 0
  for (int l = 0; l + 1 < layers; ++l) {
    const Matrix& hl = cache.h[static_cast<std::size_t>(l) + 1];
    const Matrix& gl = cache.g[static_cast<std::size_t>(l) + 1];
    const Matrix s = (1.0 - hl.array().square()).matrix();
    const Matrix d = gl.cwiseProduct(s);
    // g[l] = W_l^T d
    weight_grad(l).noalias() += d * gbar_l.transpose();
    const Matrix dbar = params.weight(l) * gbar_l;
    // d = g[l+1] .* (1 - h^2)
    hbar[static_cast<std::size_t>(l) + 1] = -2.0 * hl.cwiseProduct(dbar.cwiseProduct(gl));
    gbar_l = dbar.cwiseProduct(s);
  }
  // g[L-1] = W_{L-1}^T broadcast.
  weight_grad(layers - 1).noalias() += gbar_l.rowwise().sum().transpose();

  if (layers == 1) return Matrix::Zero(params.input_dim(), batch);

  // Reverse the hidden forward chain; the output layer value is unused.
  Matrix xbar;
  for (int l = layers - 2; l >= 0; --l) {
    const Matrix& hl = cache.h[static_cast<std::size_t>(l) + 1];
    const Matrix abar = hbar[static_cast<std::size_t>(l) + 1].cwiseProduct((1.0 - hl.array().square()).matrix());
    const Matrix& hin = cache.h[static_cast<std::size_t>(l)];
    weight_grad(l).noalias() += abar * hin.transpose();
    bias_grad(l) += abar.rowwise().sum();
    Matrix below = params.weight(l).transpose() * abar;
    if (l == 0) {
      xbar = std::move(below);
    } else {
      hbar[static_cast<std::size_t>(l)] += below;
    }
  }
  return xbar;
}

}  // namespace mlp
}  // namespace hamassim
