// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "relevance/nn/tensor.hpp"

namespace relevance::nn {

enum class OptimizerKind { Adam, Adagrad };

inline std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "Adam" : "Adagrad"; }

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdagradConfig {
  double learning_rate = 0.01;
  double epsilon = 1e-8;
};

/// Per-parameter accumulators. Adam uses both moments; Adagrad uses only
/// `second` for the running sum of squared gradients.
template <typename T>
struct OptimizerState {
  std::vector<Tensor<T>> first;
  std::vector<Tensor<T>> second;
  std::uint64_t step = 0;

  template <typename P>
  static OptimizerState zeros_like(const std::vector<P*>& params) {
    OptimizerState s;
    for (const auto* p : params) {
      s.first.emplace_back(p->rows(), p->cols());
      s.second.emplace_back(p->rows(), p->cols());
    }
    return s;
  }

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

namespace detail {

template <typename T>
void check_step_inputs(const std::vector<Tensor<T>*>& params, std::span<const Tensor<double>> grads,
                       const OptimizerState<T>& state) {
  if (params.size() != grads.size() || state.first.size() != params.size() || state.second.size() != params.size())
    throw ShapeError("optimizer: parameter, gradient and state counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i]) || !params[i]->same_shape(state.first[i]) ||
        !params[i]->same_shape(state.second[i]))
      throw ShapeError("optimizer: shape mismatch for parameter " + std::to_string(i));
    if (!grads[i].all_finite()) throw NumericError("optimizer: non-finite gradient for parameter " + std::to_string(i));
  }
}

}  // namespace detail

/// Bias-corrected Adam. Increments state.step once per call.
template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, std::span<const Tensor<double>> grads, OptimizerState<T>& state,
               const AdamConfig& cfg) {
  detail::check_step_inputs(params, grads, state);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& theta = *params[p];
    auto& m = state.first[p];
    auto& v = state.second[p];
    const auto& g = grads[p];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * g[i];
      const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * g[i] * g[i];
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = cfg.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + cfg.epsilon);
      theta[i] = static_cast<T>(static_cast<double>(theta[i]) - update);
    }
  }
}

/// Adagrad: accum += g^2; theta -= lr * g / (sqrt(accum) + eps).
template <typename T>
void adagrad_step(const std::vector<Tensor<T>*>& params, std::span<const Tensor<double>> grads,
                  OptimizerState<T>& state, const AdagradConfig& cfg) {
  detail::check_step_inputs(params, grads, state);
  ++state.step;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& theta = *params[p];
    auto& acc = state.second[p];
    const auto& g = grads[p];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double a = static_cast<double>(acc[i]) + g[i] * g[i];
      acc[i] = static_cast<T>(a);
      const double update = cfg.learning_rate * g[i] / (std::sqrt(a) + cfg.epsilon);
      theta[i] = static_cast<T>(static_cast<double>(theta[i]) - update);
    }
  }
}

}  // namespace relevance::nn
