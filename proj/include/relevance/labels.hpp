// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace relevance {

/// Three-class relevance target. The numeric order is also the component
/// order of every probability vector, including on the wire.
enum class RelevanceLabel : std::size_t { Relevant = 0, NotRelevant = 1, CantDecide = 2 };

inline constexpr std::size_t kNumClasses = 3;

inline constexpr std::array<RelevanceLabel, kNumClasses> kAllLabels = {
    RelevanceLabel::Relevant, RelevanceLabel::NotRelevant, RelevanceLabel::CantDecide};

constexpr std::size_t index_of(RelevanceLabel label) { return static_cast<std::size_t>(label); }

inline RelevanceLabel label_from_index(std::size_t i) {
  if (i >= kNumClasses) throw std::out_of_range("label index " + std::to_string(i));
  return static_cast<RelevanceLabel>(i);
}

constexpr std::string_view to_string(RelevanceLabel label) {
  switch (label) {
    case RelevanceLabel::Relevant: return "Relevant";
    case RelevanceLabel::NotRelevant: return "Not Relevant";
    case RelevanceLabel::CantDecide: return "Can't Decide";
  }
  return "?";
}

/// Accepts the canonical display strings only.
inline std::optional<RelevanceLabel> parse_label(std::string_view s) {
  for (auto l : kAllLabels)
    if (s == to_string(l)) return l;
  return std::nullopt;
}

/// Probability vector over (Relevant, Not Relevant, Can't Decide).
struct LabelDistribution {
  std::array<double, kNumClasses> probs{1.0 / 3, 1.0 / 3, 1.0 / 3};

  static LabelDistribution uniform() { return {}; }

  double operator[](RelevanceLabel l) const { return probs[index_of(l)]; }

  /// Ties resolve toward the lower index: Relevant < NotRelevant < CantDecide.
  RelevanceLabel argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < kNumClasses; ++i)
      if (probs[i] > probs[best]) best = i;
    return label_from_index(best);
  }

  friend bool operator==(const LabelDistribution&, const LabelDistribution&) = default;
};

}  // namespace relevance
