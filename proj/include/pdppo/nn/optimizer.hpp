#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "pdppo/error.hpp"
#include "pdppo/nn/mlp.hpp"

namespace pdppo::nn {

enum class OptimizerKind { sgd, adam };

inline std::string_view to_string(OptimizerKind k) {
  return k == OptimizerKind::sgd ? "sgd" : "adam";
}
inline OptimizerKind optimizer_from_string(std::string_view s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + std::string(s) + "'");
}

/// First-order optimizer bound to one network. Adam keeps its own moments
/// and step counter, so every network needs its own instance.
class Optimizer {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  Optimizer() = default;

  Optimizer(OptimizerKind kind, double learning_rate)
      : kind_(kind), lr_(learning_rate) {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  }

  OptimizerKind kind() const { return kind_; }
  double learning_rate() const { return lr_; }
  long step_count() const { return steps_; }

  void apply_update(MlpNet& net, const GradientTape& tape) {
    check_shapes(net, tape);
    if (kind_ == OptimizerKind::sgd) {
      for (std::size_t k = 0; k < net.num_layers(); ++k) {
        net.weights()[k] -= lr_ * tape.weights[k];
        net.biases()[k] -= lr_ * tape.biases[k];
      }
      ++steps_;
      return;
    }

    if (m_.weights.empty()) {
      m_ = GradientTape(net);
      v_ = GradientTape(net);
    }
    ++steps_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(steps_));
    auto step = [&](auto& param, const auto& grad, auto& m, auto& v) {
      m = kBeta1 * m + (1.0 - kBeta1) * grad;
      v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
      param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + kEpsilon);
    };
    for (std::size_t k = 0; k < net.num_layers(); ++k) {
      step(net.weights()[k], tape.weights[k], m_.weights[k], v_.weights[k]);
      step(net.biases()[k], tape.biases[k], m_.biases[k], v_.biases[k]);
    }
  }

 private:
  static void check_shapes(const MlpNet& net, const GradientTape& tape) {
    if (tape.weights.size() != net.num_layers() ||
        tape.biases.size() != net.num_layers()) {
      throw ShapeError("gradient tape layer count does not match the network");
    }
    for (std::size_t k = 0; k < net.num_layers(); ++k) {
      if (tape.weights[k].rows() != net.weights()[k].rows() ||
          tape.weights[k].cols() != net.weights()[k].cols() ||
          tape.biases[k].size() != net.biases()[k].size()) {
        throw ShapeError("gradient tape shape does not match layer " + std::to_string(k));
      }
    }
  }

  OptimizerKind kind_ = OptimizerKind::adam;
  double lr_ = 1e-3;
  long steps_ = 0;
  GradientTape m_;
  GradientTape v_;
};

}  // namespace pdppo::nn
