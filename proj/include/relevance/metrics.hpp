// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "relevance/labels.hpp"

namespace relevance {

/// counts[true][predicted].
struct ConfusionCounts {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

  std::uint64_t& at(RelevanceLabel truth, RelevanceLabel pred) { return counts[index_of(truth)][index_of(pred)]; }
  std::uint64_t at(RelevanceLabel truth, RelevanceLabel pred) const { return counts[index_of(truth)][index_of(pred)]; }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto& row : counts)
      for (auto c : row) t += c;
    return t;
  }

  std::uint64_t support(RelevanceLabel truth) const {
    std::uint64_t s = 0;
    for (auto c : counts[index_of(truth)]) s += c;
    return s;
  }

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct ScoreTriple {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  friend bool operator==(const ScoreTriple&, const ScoreTriple&) = default;
};

enum class ScoreMode { Macro, BinaryRelevant };

inline std::string_view to_string(ScoreMode m) { return m == ScoreMode::Macro ? "macro" : "binary-relevant"; }

inline double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

inline ConfusionCounts confusion(const std::vector<RelevanceLabel>& truth, const std::vector<RelevanceLabel>& predicted) {
  if (truth.size() != predicted.size())
    throw std::invalid_argument("confusion: " + std::to_string(truth.size()) + " truths vs " +
                                std::to_string(predicted.size()) + " predictions");
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) ++c.at(truth[i], predicted[i]);
  return c;
}

namespace detail {

inline double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace detail

/// Macro: per-class precision/recall over classes with nonzero support,
/// averaged, then F1 of the averages. Binary-relevant: Relevant is the
/// positive class, everything else negative. Zero denominators give 0.
inline ScoreTriple score(const ConfusionCounts& c, ScoreMode mode = ScoreMode::Macro) {
  auto class_pr = [&](std::size_t k) {
    std::uint64_t tp = c.counts[k][k], pred = 0, actual = 0;
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      pred += c.counts[j][k];
      actual += c.counts[k][j];
    }
    return std::pair{detail::ratio(tp, pred), detail::ratio(tp, actual)};
  };
  if (mode == ScoreMode::BinaryRelevant) {
    auto [p, r] = class_pr(index_of(RelevanceLabel::Relevant));
    return {p, r, f1_of(p, r)};
  }
  double p_sum = 0.0, r_sum = 0.0;
  std::size_t supported = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    if (c.support(label_from_index(k)) == 0) continue;
    auto [p, r] = class_pr(k);
    p_sum += p;
    r_sum += r;
    ++supported;
  }
  if (supported == 0) return {};
  const double p = p_sum / static_cast<double>(supported);
  const double r = r_sum / static_cast<double>(supported);
  return {p, r, f1_of(p, r)};
}

/// Component-wise arithmetic mean; f1 is averaged, not recomputed.
inline ScoreTriple average_f1(const std::vector<ScoreTriple>& per_iteration) {
  if (per_iteration.empty()) throw std::invalid_argument("average_f1 of an empty list");
  ScoreTriple avg;
  for (const auto& s : per_iteration) {
    avg.precision += s.precision;
    avg.recall += s.recall;
    avg.f1 += s.f1;
  }
  const double n = static_cast<double>(per_iteration.size());
  avg.precision /= n;
  avg.recall /= n;
  avg.f1 /= n;
  return avg;
}

/// y = a * ln(x) + b
struct TrendlineFit {
  double a = 0.0;
  double b = 0.0;
  double residual_ss = 0.0;
  std::optional<long long> crossing_n;

  double operator()(double x) const { return a * std::log(x) + b; }

  /// Rounded x at which the curve equals `y`; absent for a flat fit.
  std::optional<long long> crossing(double y) const {
    if (a == 0.0) return std::nullopt;
    const double x = std::exp((y - b) / a);
    if (!std::isfinite(x)) return std::nullopt;
    return std::llround(x);
  }
};

struct TrendPoint {
  double n;
  double y;
};

/// Least squares over (ln n, y). When `target` is given, crossing_n is where
/// the fitted curve reaches it.
inline TrendlineFit fit_log(const std::vector<TrendPoint>& points, std::optional<double> target = std::nullopt) {
  if (points.size() < 2) throw std::invalid_argument("fit_log needs at least two points");
  double mean_x = 0.0, mean_y = 0.0;
  for (const auto& p : points) {
    if (!(p.n >= 1.0)) throw std::invalid_argument("fit_log requires n >= 1");
    mean_x += std::log(p.n);
    mean_y += p.y;
  }
  const double count = static_cast<double>(points.size());
  mean_x /= count;
  mean_y /= count;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    const double dx = std::log(p.n) - mean_x;
    sxx += dx * dx;
    sxy += dx * (p.y - mean_y);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_log is singular: all n are equal");
  TrendlineFit fit;
  fit.a = sxy / sxx;
  fit.b = mean_y - fit.a * mean_x;
  for (const auto& p : points) {
    const double r = p.y - fit(p.n);
    fit.residual_ss += r * r;
  }
  if (target) fit.crossing_n = fit.crossing(*target);
  return fit;
}

/// Live F1 proxy from the count of user-labeled examples. The default
/// coefficients come from the wildfire simulation's trendline.
struct PerformanceEstimator {
  double a = 0.09;
  double b = 0.22;

  double operator()(std::uint64_t n_trained) const {
    if (n_trained == 0) return 0.0;
    return std::clamp(a * std::log(static_cast<double>(n_trained)) + b, 0.0, 1.0);
  }
};

inline double estimate_f1(std::uint64_t n_trained, const PerformanceEstimator& est = {}) { return est(n_trained); }

}  // namespace relevance
