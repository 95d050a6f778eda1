#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "hamassim/linalg.hpp"
#include "hamassim/systems.hpp"

namespace hamassim {

/// Fully connected tanh network. Parameters live in one flat vector so the
/// optimizer can treat them as a single array; per-layer weights and biases
/// are column-major views into it, layer by layer as [W_l, b_l].
struct MlpParams {
  std::vector<int> layer_sizes;  // input, hidden..., output
  Vector theta;

  static MlpParams zeros(std::vector<int> layer_sizes);
  /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static MlpParams glorot(std::vector<int> layer_sizes, Rng& rng);

  int num_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  Eigen::Index parameter_count() const { return theta.size(); }

  Eigen::Index weight_offset(int layer) const;
  Eigen::Index bias_offset(int layer) const;

  Eigen::Map<const Matrix> weight(int layer) const;
  Eigen::Map<const Vector> bias(int layer) const;
  Eigen::Map<Matrix> weight(int layer);
  Eigen::Map<Vector> bias(int layer);

  void validate() const;
};

Eigen::Index mlp_parameter_count(const std::vector<int>& layer_sizes);

/// Activations kept from a forward pass for the backward pass.
struct MlpCache {
  std::vector<Matrix> h;  // h[0] = input, h[l] = tanh(a_l) for hidden layers
};

/// Cache of the input-gradient program of a scalar-output network.
struct MlpGradCache {
  std::vector<Matrix> h;  // as in MlpCache
  std::vector<Matrix> g;  // g[l] = d out / d h_l, l = 0..L-1
};

namespace mlp {

/// Columns of x are samples. Affine maps alternate with tanh; the last
/// layer is affine only.
Matrix forward(const MlpParams& params, const Matrix& x, MlpCache* cache = nullptr);
Vector forward(const MlpParams& params, const Vector& x);

/// Vector-Jacobian product of forward. Accumulates d/dtheta of
/// sum(ybar .* y) into grad and returns d/dx.
Matrix backward(const MlpParams& params, const MlpCache& cache, const Matrix& ybar, Eigen::Ref<Vector> grad);

/// Gradient of a scalar-output network with respect to its input, one
/// column per sample, written as an explicit first-order program so it can
/// itself be differentiated.
Matrix input_gradient(const MlpParams& params, const Matrix& x, MlpGradCache* cache = nullptr);

/// Vector-Jacobian product of input_gradient: accumulates d/dtheta of
/// sum(gbar .* G) into grad and returns d/dx.
Matrix input_gradient_backward(const MlpParams& params, const MlpGradCache& cache, const Matrix& gbar,
                               Eigen::Ref<Vector> grad);

/// The same two programs over a generic scalar type (double or ad::Var),
/// one sample at a time. Used to cross-check the batched code on the tape.
template <class T>
std::vector<T> forward_generic(const std::vector<int>& sizes, std::span<const T> theta, std::vector<T> x) {
  using std::tanh;
  std::size_t offset = 0;
  const int layers = static_cast<int>(sizes.size()) - 1;
  for (int l = 0; l < layers; ++l) {
    const auto in = static_cast<std::size_t>(sizes[l]);
    const auto out = static_cast<std::size_t>(sizes[l + 1]);
    std::vector<T> y(out);
    for (std::size_t i = 0; i < out; ++i) {
      T acc = theta[offset + in * out + i];
      for (std::size_t j = 0; j < in; ++j) acc = acc + theta[offset + j * out + i] * x[j];
      y[i] = l + 1 < layers ? tanh(acc) : acc;
    }
    offset += in * out + out;
    x = std::move(y);
  }
  return x;
}

template <class T>
std::vector<T> input_gradient_generic(const std::vector<int>& sizes, std::span<const T> theta, std::vector<T> x) {
  using std::tanh;
  const int layers = static_cast<int>(sizes.size()) - 1;
  std::vector<std::size_t> offsets(static_cast<std::size_t>(layers));
  std::size_t offset = 0;
  for (int l = 0; l < layers; ++l) {
    offsets[static_cast<std::size_t>(l)] = offset;
    offset += static_cast<std::size_t>(sizes[l] * sizes[l + 1] + sizes[l + 1]);
  }
  std::vector<std::vector<T>> h{x};
  for (int l = 0; l + 1 < layers; ++l) {
    const auto in = static_cast<std::size_t>(sizes[l]);
    const auto out = static_cast<std::size_t>(sizes[l + 1]);
    const std::size_t off = offsets[static_cast<std::size_t>(l)];
    std::vector<T> y(out);
    for (std::size_t i = 0; i < out; ++i) {
      T acc = theta[off + in * out + i];
      for (std::size_t j = 0; j < in; ++j) acc = acc + theta[off + j * out + i] * h.back()[j];
      y[i] = tanh(acc);
    }
    h.push_back(std::move(y));
  }
  // Output row of the last layer seeds the gradient.
  const auto last_in = static_cast<std::size_t>(sizes[static_cast<std::size_t>(layers - 1)]);
  const std::size_t last_off = offsets.back();
  std::vector<T> g(last_in);
  for (std::size_t j = 0; j < last_in; ++j) g[j] = theta[last_off + j];
  for (int l = layers - 2; l >= 0; --l) {
    const auto in = static_cast<std::size_t>(sizes[l]);
    const auto out = static_cast<std::size_t>(sizes[l + 1]);
    const std::size_t off = offsets[static_cast<std::size_t>(l)];
    const std::vector<T>& hl = h[static_cast<std::size_t>(l + 1)];
    std::vector<T> d(out);
    for (std::size_t i = 0; i < out; ++i) d[i] = g[i] * (1.0 - hl[i] * hl[i]);
    std::vector<T> prev(in);
    for (std::size_t j = 0; j < in; ++j) {
      T acc = 0.0;
      for (std::size_t i = 0; i < out; ++i) acc = acc + theta[off + j * out + i] * d[i];
      prev[j] = acc;
    }
    g = std::move(prev);
  }
  return g;
}

}  // namespace mlp
}  // namespace hamassim
