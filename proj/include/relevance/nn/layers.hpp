// SPDX-License-Identifier: Apache-2.0
//
// Fixed differentiable layers. Parameters are stored as Tensor<T> (float for
// deployed models, double for gradient checking); activations, caches and
// gradients are always double.
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "relevance/nn/tensor.hpp"

namespace relevance::nn {

using Vec = std::vector<double>;
using Grad = Tensor<double>;

// ---------------------------------------------------------------------------
// Convolution over the time axis

/// Valid 1-d convolution with stride 1.
/// filters is [n_filters x (kernel * dim)] laid out as filter[f, k * dim + d].
/// Rows at or beyond `nonzero_rows` are known to be zero and are skipped.
template <typename In, typename W>
Tensor<double> conv1d_forward(const Tensor<In>& input, const Tensor<W>& filters, const Tensor<W>& bias,
                              std::size_t kernel, std::size_t nonzero_rows) {
  const std::size_t len = input.rows(), dim = input.cols(), nf = filters.rows();
  if (kernel == 0 || kernel > len)
    throw ShapeError("conv1d kernel " + std::to_string(kernel) + " exceeds sequence length " + std::to_string(len));
  if (filters.cols() != kernel * dim || bias.size() != nf)
    throw ShapeError("conv1d filter bank " + shape_string(filters.rows(), filters.cols()) +
                     " does not match kernel*dim=" + std::to_string(kernel * dim));
  nonzero_rows = std::min(nonzero_rows, len);
  const std::size_t steps = len - kernel + 1;
  Tensor<double> out(steps, nf);
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t kmax = t >= nonzero_rows ? 0 : std::min(kernel, nonzero_rows - t);
    for (std::size_t f = 0; f < nf; ++f) {
      double acc = static_cast<double>(bias[f]);
      const W* fw = filters.data() + f * kernel * dim;
      for (std::size_t k = 0; k < kmax; ++k) {
        const In* x = input.data() + (t + k) * dim;
        const W* w = fw + k * dim;
        for (std::size_t d = 0; d < dim; ++d) acc += static_cast<double>(x[d]) * static_cast<double>(w[d]);
      }
      out(t, f) = acc;
    }
  }
  return out;
}

template <typename In, typename W>
Tensor<double> conv1d_forward(const Tensor<In>& input, const Tensor<W>& filters, const Tensor<W>& bias,
                              std::size_t kernel) {
  return conv1d_forward(input, filters, bias, kernel, input.rows());
}

/// Accumulates filter and bias gradients. The input is not trainable, so no
/// input gradient is produced.
template <typename In>
void conv1d_backward(const Tensor<In>& input, std::size_t kernel, const Tensor<double>& grad_out,
                     Grad& grad_filters, Grad& grad_bias, std::size_t nonzero_rows) {
  const std::size_t dim = input.cols(), nf = grad_out.cols();
  nonzero_rows = std::min(nonzero_rows, input.rows());
  for (std::size_t t = 0; t < grad_out.rows(); ++t) {
    const std::size_t kmax = t >= nonzero_rows ? 0 : std::min(kernel, nonzero_rows - t);
    for (std::size_t f = 0; f < nf; ++f) {
      const double g = grad_out(t, f);
      if (g == 0.0) continue;
      grad_bias[f] += g;
      double* gw = grad_filters.data() + f * kernel * dim;
      for (std::size_t k = 0; k < kmax; ++k) {
        const In* x = input.data() + (t + k) * dim;
        for (std::size_t d = 0; d < dim; ++d) gw[k * dim + d] += g * static_cast<double>(x[d]);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Pooling

struct MaxPoolResult {
  Vec values;
  std::vector<std::size_t> argmax;
};

/// Max over the time axis per column. Ties go to the lowest time index.
inline MaxPoolResult global_maxpool1d(const Tensor<double>& input) {
  if (input.rows() == 0) throw ShapeError("max pooling over an empty time axis");
  MaxPoolResult r{Vec(input.cols()), std::vector<std::size_t>(input.cols(), 0)};
  for (std::size_t f = 0; f < input.cols(); ++f) {
    double best = input(0, f);
    std::size_t at = 0;
    for (std::size_t t = 1; t < input.rows(); ++t)
      if (input(t, f) > best) {
        best = input(t, f);
        at = t;
      }
    r.values[f] = best;
    r.argmax[f] = at;
  }
  return r;
}

inline Tensor<double> global_maxpool1d_backward(const MaxPoolResult& fwd, std::size_t steps, std::span<const double> grad) {
  Tensor<double> g(steps, fwd.values.size());
  for (std::size_t f = 0; f < grad.size(); ++f) g(fwd.argmax[f], f) = grad[f];
  return g;
}

// ---------------------------------------------------------------------------
// Dense

template <typename W>
Vec dense_forward(std::span<const double> x, const Tensor<W>& weights, const Tensor<W>& bias) {
  if (weights.cols() != x.size() || bias.size() != weights.rows())
    throw ShapeError("dense weights " + shape_string(weights.rows(), weights.cols()) + " incompatible with input of " +
                     std::to_string(x.size()) + " and bias of " + std::to_string(bias.size()));
  Vec y(weights.rows());
  for (std::size_t i = 0; i < weights.rows(); ++i) {
    double acc = static_cast<double>(bias[i]);
    const W* w = weights.data() + i * weights.cols();
    for (std::size_t j = 0; j < x.size(); ++j) acc += static_cast<double>(w[j]) * x[j];
    y[i] = acc;
  }
  return y;
}

/// Accumulates weight/bias gradients and returns the gradient w.r.t. x.
template <typename W>
Vec dense_backward(std::span<const double> x, const Tensor<W>& weights, std::span<const double> grad_out,
                   Grad& grad_w, Grad& grad_b) {
  Vec gx(x.size(), 0.0);
  for (std::size_t i = 0; i < weights.rows(); ++i) {
    const double g = grad_out[i];
    grad_b[i] += g;
    const W* w = weights.data() + i * weights.cols();
    double* gw = grad_w.data() + i * weights.cols();
    for (std::size_t j = 0; j < x.size(); ++j) {
      gw[j] += g * x[j];
      gx[j] += g * static_cast<double>(w[j]);
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Output

inline Vec softmax(std::span<const double> logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double z : logits) {
    if (!std::isfinite(z)) throw NumericError("softmax received a non-finite logit");
    mx = std::max(mx, z);
  }
  Vec p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += (p[i] = std::exp(logits[i] - mx));
  for (double& v : p) v /= sum;
  return p;
}

struct LossAndGrad {
  double loss;
  Vec grad_logits;
};

inline constexpr double kProbFloor = 1e-12;

/// Softmax cross-entropy. Gradient is w.r.t. the logits: probs - onehot.
inline LossAndGrad cross_entropy(std::span<const double> probs, std::size_t true_class) {
  if (true_class >= probs.size())
    throw std::out_of_range("class index " + std::to_string(true_class) + " out of range");
  LossAndGrad r{-std::log(std::max(probs[true_class], kProbFloor)), Vec(probs.begin(), probs.end())};
  r.grad_logits[true_class] -= 1.0;
  return r;
}

// ---------------------------------------------------------------------------
// Recurrent cells

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Elman cell: h' = tanh(Wx x + Wh h + b).
template <typename W>
struct RnnParams {
  const Tensor<W>& w_x;   // [H x D]
  const Tensor<W>& w_h;   // [H x H]
  const Tensor<W>& bias;  // [1 x H]
};

template <typename W, typename X>
Vec rnn_step(std::span<const X> x, std::span<const double> h, const RnnParams<W>& p) {
  const std::size_t hidden = p.w_h.rows();
  if (p.w_x.rows() != hidden || p.w_x.cols() != x.size() || p.w_h.cols() != hidden || h.size() != hidden ||
      p.bias.size() != hidden)
    throw ShapeError("rnn_step shape mismatch");
  Vec out(hidden);
  for (std::size_t i = 0; i < hidden; ++i) {
    double z = static_cast<double>(p.bias[i]);
    const W* wx = p.w_x.data() + i * x.size();
    for (std::size_t d = 0; d < x.size(); ++d) z += static_cast<double>(wx[d]) * static_cast<double>(x[d]);
    const W* wh = p.w_h.data() + i * hidden;
    for (std::size_t j = 0; j < hidden; ++j) z += static_cast<double>(wh[j]) * h[j];
    out[i] = std::tanh(z);
  }
  return out;
}

struct RnnGrads {
  Grad& w_x;
  Grad& w_h;
  Grad& bias;
};

/// Backward through one Elman step given dL/dh'. Returns dL/dh (the input
/// hidden state as fed to the step).
template <typename W, typename X>
Vec rnn_step_backward(std::span<const X> x, std::span<const double> h_in, std::span<const double> h_out,
                      std::span<const double> grad_h_out, const RnnParams<W>& p, RnnGrads& g) {
  const std::size_t hidden = h_out.size();
  Vec grad_h_in(hidden, 0.0);
  for (std::size_t i = 0; i < hidden; ++i) {
    const double dz = grad_h_out[i] * (1.0 - h_out[i] * h_out[i]);
    if (dz == 0.0) continue;
    g.bias[i] += dz;
    double* gx = g.w_x.data() + i * x.size();
    for (std::size_t d = 0; d < x.size(); ++d) gx[d] += dz * static_cast<double>(x[d]);
    double* gh = g.w_h.data() + i * hidden;
    const W* wh = p.w_h.data() + i * hidden;
    for (std::size_t j = 0; j < hidden; ++j) {
      gh[j] += dz * h_in[j];
      grad_h_in[j] += dz * static_cast<double>(wh[j]);
    }
  }
  return grad_h_in;
}

/// LSTM cell with gate blocks stacked row-wise in the order
/// input, forget, candidate, output.
template <typename W>
struct LstmParams {
  const Tensor<W>& w_x;   // [4H x D]
  const Tensor<W>& w_h;   // [4H x H]
  const Tensor<W>& bias;  // [1 x 4H]
};

struct LstmStep {
  Vec i, f, g, o;  // gate activations
  Vec c, h;        // new cell and hidden state
  Vec tanh_c;
};

template <typename W, typename X>
LstmStep lstm_step(std::span<const X> x, std::span<const double> h, std::span<const double> c,
                   const LstmParams<W>& p) {
  const std::size_t hidden = p.w_h.cols();
  if (p.w_h.rows() != 4 * hidden || p.w_x.rows() != 4 * hidden || p.w_x.cols() != x.size() || h.size() != hidden ||
      c.size() != hidden || p.bias.size() != 4 * hidden)
    throw ShapeError("lstm_step shape mismatch");
  Vec z(4 * hidden);
  for (std::size_t r = 0; r < 4 * hidden; ++r) {
    double acc = static_cast<double>(p.bias[r]);
    const W* wx = p.w_x.data() + r * x.size();
    for (std::size_t d = 0; d < x.size(); ++d) acc += static_cast<double>(wx[d]) * static_cast<double>(x[d]);
    const W* wh = p.w_h.data() + r * hidden;
    for (std::size_t j = 0; j < hidden; ++j) acc += static_cast<double>(wh[j]) * h[j];
    z[r] = acc;
  }
  LstmStep s{Vec(hidden), Vec(hidden), Vec(hidden), Vec(hidden), Vec(hidden), Vec(hidden), Vec(hidden)};
  for (std::size_t j = 0; j < hidden; ++j) {
    s.i[j] = sigmoid(z[j]);
    s.f[j] = sigmoid(z[hidden + j]);
    s.g[j] = std::tanh(z[2 * hidden + j]);
    s.o[j] = sigmoid(z[3 * hidden + j]);
    s.c[j] = s.f[j] * c[j] + s.i[j] * s.g[j];
    s.tanh_c[j] = std::tanh(s.c[j]);
    s.h[j] = s.o[j] * s.tanh_c[j];
  }
  return s;
}

struct LstmGrads {
  Grad& w_x;
  Grad& w_h;
  Grad& bias;
};

/// Backward through one LSTM step. Takes dL/dh' and dL/dc' and returns
/// (dL/dh, dL/dc) for the states that were fed into the step.
template <typename W, typename X>
std::pair<Vec, Vec> lstm_step_backward(std::span<const X> x, std::span<const double> h_in,
                                       std::span<const double> c_in, const LstmStep& s,
                                       std::span<const double> grad_h, std::span<const double> grad_c,
                                       const LstmParams<W>& p, LstmGrads& g) {
  const std::size_t hidden = h_in.size();
  Vec dz(4 * hidden);
  Vec grad_c_in(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    const double dc = grad_c[j] + grad_h[j] * s.o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
    const double d_o = grad_h[j] * s.tanh_c[j];
    const double d_i = dc * s.g[j];
    const double d_f = dc * c_in[j];
    const double d_g = dc * s.i[j];
    grad_c_in[j] = dc * s.f[j];
    dz[j] = d_i * s.i[j] * (1.0 - s.i[j]);
    dz[hidden + j] = d_f * s.f[j] * (1.0 - s.f[j]);
    dz[2 * hidden + j] = d_g * (1.0 - s.g[j] * s.g[j]);
    dz[3 * hidden + j] = d_o * s.o[j] * (1.0 - s.o[j]);
  }
  Vec grad_h_in(hidden, 0.0);
  for (std::size_t r = 0; r < 4 * hidden; ++r) {
    const double d = dz[r];
    if (d == 0.0) continue;
    g.bias[r] += d;
    double* gx = g.w_x.data() + r * x.size();
    for (std::size_t k = 0; k < x.size(); ++k) gx[k] += d * static_cast<double>(x[k]);
    double* gh = g.w_h.data() + r * hidden;
    const W* wh = p.w_h.data() + r * hidden;
    for (std::size_t j = 0; j < hidden; ++j) {
      gh[j] += d * h_in[j];
      grad_h_in[j] += d * static_cast<double>(wh[j]);
    }
  }
  return {std::move(grad_h_in), std::move(grad_c_in)};
}

// ---------------------------------------------------------------------------
// Dropout

/// Inverted-dropout multipliers: 0 with probability `rate`, else 1/(1-rate).
template <typename Rng>
Vec dropout_mask(std::size_t n, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must be in [0, 1)");
  Vec mask(n, 1.0);
  if (rate == 0.0) return mask;
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (auto& m : mask) m = keep(rng) ? scale : 0.0;
  return mask;
}

template <typename Rng>
Vec dropout(std::span<const double> x, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must be in [0, 1)");
  Vec out(x.begin(), x.end());
  if (!training || rate == 0.0) return out;
  auto mask = dropout_mask(x.size(), rate, rng);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return out;
}

}  // namespace relevance::nn
