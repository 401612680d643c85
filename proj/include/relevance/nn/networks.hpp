// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "relevance/labels.hpp"
#include "relevance/nn/layers.hpp"
#include "relevance/text.hpp"

namespace relevance::nn {

using Rng = std::mt19937_64;

template <typename T>
void glorot_uniform(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : w.values()) v = static_cast<T>(dist(rng));
}

template <typename T>
std::vector<Grad> zero_grads(const std::vector<const Tensor<T>*>& params) {
  std::vector<Grad> g;
  g.reserve(params.size());
  for (const auto* p : params) g.emplace_back(p->rows(), p->cols());
  return g;
}

inline void check_input(const SentenceMatrix& m, std::size_t max_len, std::size_t dim) {
  if (m.max_len() != max_len || m.dim() != dim)
    throw ShapeError("sentence matrix " + shape_string(m.max_len(), m.dim()) + " does not match model input " +
                     shape_string(max_len, dim));
}

struct CnnShape {
  std::size_t max_len = 64;
  std::size_t dim = 300;
  std::size_t filters = 16;
  std::size_t kernel = 2;
  friend bool operator==(const CnnShape&, const CnnShape&) = default;
};

/// conv1d (linear) -> global max pool -> dense(3) -> softmax.
template <typename T>
class CnnNetwork {
 public:
  using Shape = CnnShape;

  CnnNetwork() = default;

  explicit CnnNetwork(const Shape& shape)
      : shape_(shape),
        filters_(shape.filters, shape.kernel * shape.dim),
        conv_bias_(1, shape.filters),
        dense_w_(kNumClasses, shape.filters),
        dense_b_(1, kNumClasses) {
    if (shape.kernel == 0 || shape.kernel > shape.max_len)
      throw ShapeError("kernel size " + std::to_string(shape.kernel) + " must be in [1, max_len=" +
                       std::to_string(shape.max_len) + "]");
    if (shape.filters == 0 || shape.dim == 0) throw ShapeError("filters and dim must be positive");
  }

  CnnNetwork(const Shape& shape, Rng& rng) : CnnNetwork(shape) {
    glorot_uniform(filters_, shape.kernel * shape.dim, shape.kernel * shape.filters, rng);
    glorot_uniform(dense_w_, shape.filters, kNumClasses, rng);
  }

  const Shape& shape() const { return shape_; }

  std::vector<Tensor<T>*> parameters() { return {&filters_, &conv_bias_, &dense_w_, &dense_b_}; }
  std::vector<const Tensor<T>*> parameters() const { return {&filters_, &conv_bias_, &dense_w_, &dense_b_}; }
  static std::vector<std::string> parameter_names() { return {"conv.filters", "conv.bias", "dense.w", "dense.b"}; }

  Vec logits(const SentenceMatrix& m) const {
    check_input(m, shape_.max_len, shape_.dim);
    auto conv = conv1d_forward(m.rows, filters_, conv_bias_, shape_.kernel, m.length);
    auto pooled = global_maxpool1d(conv);
    return dense_forward(pooled.values, dense_w_, dense_b_);
  }

  /// Adds this example's gradients into `grads`; returns its loss.
  /// The CNN has no stochastic layers, so `rng` is unused.
  double accumulate_gradients(const SentenceMatrix& m, std::size_t label, std::vector<Grad>& grads,
                              Rng* /*rng*/) const {
    check_input(m, shape_.max_len, shape_.dim);
    auto conv = conv1d_forward(m.rows, filters_, conv_bias_, shape_.kernel, m.length);
    auto pooled = global_maxpool1d(conv);
    auto z = dense_forward(pooled.values, dense_w_, dense_b_);
    auto lg = cross_entropy(softmax(z), label);
    auto g_pooled = dense_backward(pooled.values, dense_w_, lg.grad_logits, grads[2], grads[3]);
    auto g_conv = global_maxpool1d_backward(pooled, conv.rows(), g_pooled);
    conv1d_backward(m.rows, shape_.kernel, g_conv, grads[0], grads[1], m.length);
    return lg.loss;
  }

  template <typename U>
  CnnNetwork<U> cast() const {
    CnnNetwork<U> out(shape_);
    auto src = parameters();
    auto dst = out.parameters();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->template cast<U>();
    return out;
  }

 private:
  Shape shape_;
  Tensor<T> filters_;
  Tensor<T> conv_bias_;
  Tensor<T> dense_w_;
  Tensor<T> dense_b_;
};

enum class CellKind { Lstm, Rnn };

struct RecurrentShape {
  CellKind cell = CellKind::Lstm;
  std::size_t max_len = 64;
  std::size_t dim = 300;
  std::size_t hidden = 300;
  double dropout = 0.0;
  double recurrent_dropout = 0.0;
  friend bool operator==(const RecurrentShape&, const RecurrentShape&) = default;
};

/// Masked recurrence over the real rows, then dense(3) -> softmax on the
/// hidden state at the last real step. Input dropout and recurrent dropout
/// draw one mask per sequence and hold it across time steps.
template <typename T>
class RecurrentNetwork {
 public:
  using Shape = RecurrentShape;

  RecurrentNetwork() = default;

  explicit RecurrentNetwork(const Shape& shape)
      : shape_(shape),
        w_x_(gates() * shape.hidden, shape.dim),
        w_h_(gates() * shape.hidden, shape.hidden),
        bias_(1, gates() * shape.hidden),
        dense_w_(kNumClasses, shape.hidden),
        dense_b_(1, kNumClasses) {
    if (shape.hidden == 0 || shape.dim == 0 || shape.max_len == 0) throw ShapeError("recurrent extents must be positive");
    if (!(shape.dropout >= 0 && shape.dropout < 1) || !(shape.recurrent_dropout >= 0 && shape.recurrent_dropout < 1))
      throw std::invalid_argument("dropout rates must be in [0, 1)");
  }

  RecurrentNetwork(const Shape& shape, Rng& rng) : RecurrentNetwork(shape) {
    glorot_uniform(w_x_, shape.dim, gates() * shape.hidden, rng);
    glorot_uniform(w_h_, shape.hidden, gates() * shape.hidden, rng);
    glorot_uniform(dense_w_, shape.hidden, kNumClasses, rng);
    if (shape.cell == CellKind::Lstm)
      for (std::size_t j = 0; j < shape.hidden; ++j) bias_[shape.hidden + j] = T(1);  // forget gate
  }

  const Shape& shape() const { return shape_; }

  std::vector<Tensor<T>*> parameters() { return {&w_x_, &w_h_, &bias_, &dense_w_, &dense_b_}; }
  std::vector<const Tensor<T>*> parameters() const { return {&w_x_, &w_h_, &bias_, &dense_w_, &dense_b_}; }
  static std::vector<std::string> parameter_names() {
    return {"recurrent.w_x", "recurrent.w_h", "recurrent.bias", "dense.w", "dense.b"};
  }

  Vec logits(const SentenceMatrix& m) const {
    check_input(m, shape_.max_len, shape_.dim);
    Vec h(shape_.hidden, 0.0), c(shape_.hidden, 0.0);
    for (std::size_t t = 0; t < m.length; ++t) {
      auto x = m.rows.row(t);
      if (shape_.cell == CellKind::Lstm) {
        auto s = lstm_step<T, float>(x, h, c, lstm_params());
        h = std::move(s.h);
        c = std::move(s.c);
      } else {
        h = rnn_step<T, float>(x, h, rnn_params());
      }
    }
    return dense_forward(h, dense_w_, dense_b_);
  }

  /// Training forward/backward. With rng == nullptr dropout is disabled.
  double accumulate_gradients(const SentenceMatrix& m, std::size_t label, std::vector<Grad>& grads, Rng* rng) const {
    check_input(m, shape_.max_len, shape_.dim);
    const std::size_t H = shape_.hidden, D = shape_.dim, len = m.length;
    Vec mask_x(D, 1.0), mask_h(H, 1.0);
    if (rng) {
      mask_x = dropout_mask(D, shape_.dropout, *rng);
      mask_h = dropout_mask(H, shape_.recurrent_dropout, *rng);
    }
    std::vector<Vec> xs(len), h_ins(len), c_ins(len);
    std::vector<LstmStep> lsteps;
    std::vector<Vec> rnn_out;
    Vec h(H, 0.0), c(H, 0.0);
    for (std::size_t t = 0; t < len; ++t) {
      auto row = m.rows.row(t);
      xs[t].resize(D);
      for (std::size_t d = 0; d < D; ++d) xs[t][d] = static_cast<double>(row[d]) * mask_x[d];
      h_ins[t].resize(H);
      for (std::size_t j = 0; j < H; ++j) h_ins[t][j] = h[j] * mask_h[j];
      if (shape_.cell == CellKind::Lstm) {
        c_ins[t] = c;
        lsteps.push_back(lstm_step<T, double>(xs[t], h_ins[t], c, lstm_params()));
        h = lsteps.back().h;
        c = lsteps.back().c;
      } else {
        rnn_out.push_back(rnn_step<T, double>(xs[t], h_ins[t], rnn_params()));
        h = rnn_out.back();
      }
    }
    auto z = dense_forward(h, dense_w_, dense_b_);
    auto lg = cross_entropy(softmax(z), label);
    Vec dh = dense_backward(h, dense_w_, lg.grad_logits, grads[3], grads[4]);
    Vec dc(H, 0.0);
    for (std::size_t t = len; t-- > 0;) {
      Vec dh_in;
      if (shape_.cell == CellKind::Lstm) {
        LstmGrads g{grads[0], grads[1], grads[2]};
        auto [gh, gc] = lstm_step_backward<T, double>(xs[t], h_ins[t], c_ins[t], lsteps[t], dh, dc, lstm_params(), g);
        dh_in = std::move(gh);
        dc = std::move(gc);
      } else {
        RnnGrads g{grads[0], grads[1], grads[2]};
        dh_in = rnn_step_backward<T, double>(xs[t], h_ins[t], rnn_out[t], dh, rnn_params(), g);
      }
      for (std::size_t j = 0; j < H; ++j) dh[j] = dh_in[j] * mask_h[j];
    }
    return lg.loss;
  }

  template <typename U>
  RecurrentNetwork<U> cast() const {
    RecurrentNetwork<U> out(shape_);
    auto src = parameters();
    auto dst = out.parameters();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->template cast<U>();
    return out;
  }

 private:
  std::size_t gates() const { return shape_.cell == CellKind::Lstm ? 4 : 1; }

  LstmParams<T> lstm_params() const { return {w_x_, w_h_, bias_}; }
  RnnParams<T> rnn_params() const { return {w_x_, w_h_, bias_}; }

  Shape shape_;
  Tensor<T> w_x_;
  Tensor<T> w_h_;
  Tensor<T> bias_;
  Tensor<T> dense_w_;
  Tensor<T> dense_b_;
};

}  // namespace relevance::nn
