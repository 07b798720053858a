#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pdppo/error.hpp"
#include "pdppo/random.hpp"

namespace pdppo::nn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Hidden-layer nonlinearity. The output layer never uses it.
enum class Activation { tanh, relu };

/// Output head: raw affine values, or a (grouped) softmax.
enum class Head { linear, softmax };

inline std::string_view to_string(Activation a) {
  return a == Activation::tanh ? "tanh" : "relu";
}
inline std::string_view to_string(Head h) {
  return h == Head::linear ? "linear" : "softmax";
}
inline Activation activation_from_string(std::string_view s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}
inline Head head_from_string(std::string_view s) {
  if (s == "linear") return Head::linear;
  if (s == "softmax") return Head::softmax;
  throw ConfigError("unknown head '" + std::string(s) + "'");
}

class MlpNet;

/// Per-parameter gradient buffers laid out exactly like an MlpNet.
struct GradientTape {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  int accumulated = 0;

  GradientTape() = default;
  explicit GradientTape(const MlpNet& net);

  void zero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
    accumulated = 0;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& w : weights) s += w.squaredNorm();
    for (const auto& b : biases) s += b.squaredNorm();
    return s;
  }
  double norm() const { return std::sqrt(squared_norm()); }

  void scale(double factor) {
    for (auto& w : weights) w *= factor;
    for (auto& b : biases) b *= factor;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
    for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
    return n;
  }

  /// Flattened copy: layer by layer, weights (column-major) then bias.
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(size());
    for (std::size_t k = 0; k < weights.size(); ++k) {
      out.insert(out.end(), weights[k].data(),
                 weights[k].data() + weights[k].size());
      out.insert(out.end(), biases[k].data(),
                 biases[k].data() + biases[k].size());
    }
    return out;
  }
};

/// Activations saved by a forward pass so backward can run without recomputing.
/// Columns are samples.
struct ForwardCache {
  std::vector<Matrix> inputs;  // inputs[k] feeds layer k; inputs[0] is the batch
  Matrix logits;               // pre-head affine output
  Matrix output;               // head output
  bool valid = false;
};

/// Dense feed-forward network. Weight k has shape (sizes[k+1] x sizes[k]).
class MlpNet {
 public:
  MlpNet() = default;

  MlpNet(std::vector<int> layer_sizes, Activation activation, Head head,
         std::vector<int> softmax_groups = {})
      : sizes_(std::move(layer_sizes)),
        activation_(activation),
        head_(head),
        groups_(std::move(softmax_groups)) {
    if (sizes_.size() < 2) {
      throw ConfigError("an MLP needs at least an input and an output size");
    }
    for (int s : sizes_) {
      if (s <= 0) throw ConfigError("layer sizes must be positive");
    }
    if (head_ == Head::softmax) {
      if (groups_.empty()) groups_.push_back(sizes_.back());
      const int total = std::accumulate(groups_.begin(), groups_.end(), 0);
      if (total != sizes_.back() ||
          std::any_of(groups_.begin(), groups_.end(),
                      [](int g) { return g <= 0; })) {
        throw ConfigError("softmax groups must be positive and sum to the output size");
      }
    } else {
      groups_.clear();
    }
    for (std::size_t k = 0; k + 1 < sizes_.size(); ++k) {
      weights_.emplace_back(Matrix::Zero(sizes_[k + 1], sizes_[k]));
      biases_.emplace_back(Vector::Zero(sizes_[k + 1]));
    }
  }

  /// Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases.
  void init_glorot(Rng& rng) {
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      const double limit =
          std::sqrt(6.0 / static_cast<double>(sizes_[k] + sizes_[k + 1]));
      std::uniform_real_distribution<double> dist(-limit, limit);
      Matrix& w = weights_[k];
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = dist(rng);
      }
      biases_[k].setZero();
    }
  }

  const std::vector<int>& layer_sizes() const { return sizes_; }
  const std::vector<int>& softmax_groups() const { return groups_; }
  Activation activation() const { return activation_; }
  Head head() const { return head_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  std::size_t num_layers() const { return weights_.size(); }

  std::vector<Matrix>& weights() { return weights_; }
  const std::vector<Matrix>& weights() const { return weights_; }
  std::vector<Vector>& biases() { return biases_; }
  const std::vector<Vector>& biases() const { return biases_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      n += static_cast<std::size_t>(weights_[k].size() + biases_[k].size());
    }
    return n;
  }

  bool same_shape(const MlpNet& other) const {
    return sizes_ == other.sizes_ && groups_ == other.groups_;
  }

  Vector forward(const Vector& x) const {
    Matrix batch = x;
    return forward_batch(batch).col(0);
  }

  Matrix forward_batch(const Matrix& batch) const {
    check_input(batch);
    Matrix a = batch;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      Matrix z = weights_[k] * a;
      z.colwise() += biases_[k];
      if (k + 1 < weights_.size()) {
        activate(z);
      }
      a = std::move(z);
    }
    if (head_ == Head::softmax) grouped_softmax(a);
    return a;
  }

  ForwardCache forward_cached(const Matrix& batch) const {
    check_input(batch);
    ForwardCache cache;
    cache.inputs.reserve(weights_.size());
    cache.inputs.push_back(batch);
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      Matrix z = weights_[k] * cache.inputs.back();
      z.colwise() += biases_[k];
      if (k + 1 < weights_.size()) {
        activate(z);
        cache.inputs.push_back(std::move(z));
      } else {
        cache.logits = std::move(z);
      }
    }
    cache.output = cache.logits;
    if (head_ == Head::softmax) grouped_softmax(cache.output);
    cache.valid = true;
    return cache;
  }

  /// Accumulates d(loss)/d(theta) into `tape`, given d(loss)/d(head output).
  void backward(const ForwardCache& cache, const Matrix& grad_output,
                GradientTape& tape) const {
    check_cache(cache, grad_output);
    if (head_ == Head::linear) {
      backward_logits(cache, grad_output, tape);
      return;
    }
    // Softmax Jacobian per group: dz = p * (g - <g, p>).
    Matrix grad_logits(grad_output.rows(), grad_output.cols());
    for (Eigen::Index col = 0; col < grad_output.cols(); ++col) {
      Eigen::Index offset = 0;
      for (int g : groups_) {
        auto p = cache.output.col(col).segment(offset, g);
        auto dp = grad_output.col(col).segment(offset, g);
        const double inner = p.dot(dp);
        grad_logits.col(col).segment(offset, g) =
            p.cwiseProduct((dp.array() - inner).matrix());
        offset += g;
      }
    }
    backward_logits(cache, grad_logits, tape);
  }

  /// Same as backward, but the incoming gradient is w.r.t. the pre-head logits.
  void backward_logits(const ForwardCache& cache, const Matrix& grad_logits,
                       GradientTape& tape) const {
    check_cache(cache, grad_logits);
    if (tape.weights.size() != weights_.size()) tape = GradientTape(*this);
    Matrix delta = grad_logits;
    for (std::size_t k = weights_.size(); k-- > 0;) {
      const Matrix& in = cache.inputs[k];
      tape.weights[k].noalias() += delta * in.transpose();
      tape.biases[k].noalias() += delta.rowwise().sum();
      if (k == 0) break;
      Matrix upstream = weights_[k].transpose() * delta;
      // `in` holds the activated output of layer k-1.
      if (activation_ == Activation::tanh) {
        upstream.array() *= 1.0 - in.array().square();
      } else {
        upstream.array() *= (in.array() > 0.0).cast<double>();
      }
      delta = std::move(upstream);
    }
    ++tape.accumulated;
  }

 private:
  void check_input(const Matrix& batch) const {
    if (sizes_.empty()) throw StateError("network has no layers");
    if (batch.rows() != sizes_.front()) {
      throw ShapeError("input has dimension " + std::to_string(batch.rows()) +
                       ", network expects " + std::to_string(sizes_.front()));
    }
  }

  void check_cache(const ForwardCache& cache, const Matrix& grad) const {
    if (!cache.valid) throw StateError("backward called without a cached forward pass");
    if (cache.inputs.size() != weights_.size() ||
        cache.inputs.front().rows() != sizes_.front()) {
      throw StateError("forward cache does not belong to this network");
    }
    if (grad.rows() != sizes_.back() || grad.cols() != cache.output.cols()) {
      throw ShapeError("output gradient shape does not match the cached forward pass");
    }
  }

  void activate(Matrix& z) const {
    if (activation_ == Activation::tanh) {
      z = z.array().tanh();
    } else {
      z = z.cwiseMax(0.0);
    }
  }

  void grouped_softmax(Matrix& m) const {
    for (Eigen::Index col = 0; col < m.cols(); ++col) {
      Eigen::Index offset = 0;
      for (int g : groups_) {
        auto seg = m.col(col).segment(offset, g);
        const double shift = seg.maxCoeff();
        seg = (seg.array() - shift).exp();
        seg /= seg.sum();
        offset += g;
      }
    }
  }

  std::vector<int> sizes_;
  Activation activation_ = Activation::tanh;
  Head head_ = Head::linear;
  std::vector<int> groups_;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

inline GradientTape::GradientTape(const MlpNet& net) {
  for (const auto& w : net.weights()) weights.emplace_back(Matrix::Zero(w.rows(), w.cols()));
  for (const auto& b : net.biases()) biases.emplace_back(Vector::Zero(b.size()));
}

/// Builds `input -> hidden... -> output` with Glorot-uniform weights.
inline MlpNet make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
                       Activation activation, Head head, Rng& rng,
                       std::vector<int> softmax_groups = {}) {
  std::vector<int> sizes;
  sizes.reserve(hidden.size() + 2);
  sizes.push_back(input_dim);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output_dim);
  MlpNet net(std::move(sizes), activation, head, std::move(softmax_groups));
  net.init_glorot(rng);
  return net;
}

/// Scales the tape in place so its global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
inline double clip_global_norm_inplace(GradientTape& tape, double max_norm) {
  if (!(max_norm > 0.0)) throw ConfigError("max_norm must be positive");
  const double norm = tape.norm();
  if (norm > max_norm) tape.scale(max_norm / norm);
  return norm;
}

inline GradientTape clip_global_norm(GradientTape tape, double max_norm) {
  clip_global_norm_inplace(tape, max_norm);
  return tape;
}

}  // namespace pdppo::nn
