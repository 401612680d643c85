// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "relevance/nn/layers.hpp"
#include "relevance/nn/networks.hpp"

namespace relevance::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// |a - n| / max(|a| + |n|, floor). The floor keeps entries whose true
/// gradient is zero from dividing roundoff by zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
}

/// Compares `analytic` against central differences of `loss` taken by
/// perturbing every element of `params` by +/- step. Parameters must be
/// double precision and the loss deterministic.
inline GradCheckResult grad_check(const std::function<double()>& loss, const std::vector<Tensor<double>*>& params,
                                  const std::vector<Grad>& analytic, double step = 1e-4) {
  GradCheckResult worst;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& theta = *params[p];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + step;
      const double up = loss();
      theta[i] = saved - step;
      const double down = loss();
      theta[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error(analytic[p][i], numeric);
      if (err > worst.max_rel_error || (p == 0 && i == 0))
        worst = {std::max(err, worst.max_rel_error), p, i, analytic[p][i], numeric};
    }
  }
  return worst;
}

/// Network-level check: dropout disabled, single example.
template <typename Net>
GradCheckResult grad_check(Net& net, const SentenceMatrix& input, std::size_t label, double step = 1e-4) {
  auto grads = zero_grads(std::as_const(net).parameters());
  net.accumulate_gradients(input, label, grads, nullptr);
  auto loss = [&] {
    auto p = softmax(net.logits(input));
    return cross_entropy(p, label).loss;
  };
  return grad_check(loss, net.parameters(), grads, step);
}

}  // namespace relevance::nn
