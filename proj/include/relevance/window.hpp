// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "relevance/labels.hpp"
#include "relevance/text.hpp"

namespace relevance {

enum class ExampleSource { User, Dataset };

inline std::string_view to_string(ExampleSource s) { return s == ExampleSource::User ? "user" : "dataset"; }

struct LabeledExample {
  std::string id;
  std::vector<std::string> tokens;
  SentenceMatrix matrix;
  RelevanceLabel label = RelevanceLabel::CantDecide;
  ExampleSource source = ExampleSource::User;
};

/// Builds an example from raw text. The result may be degenerate (no
/// embeddable tokens); callers decide whether to keep it.
inline LabeledExample make_example(std::string id, std::string_view raw_text, RelevanceLabel label,
                                   const EmbeddingTable& table, std::size_t max_len,
                                   ExampleSource source = ExampleSource::User) {
  LabeledExample ex{std::move(id), tokenize(clean(raw_text)), {}, label, source};
  ex.matrix = to_matrix(ex.tokens, table, max_len);
  return ex;
}

inline constexpr std::size_t kDefaultWindowCapacity = 110;
inline constexpr std::size_t kDefaultDeliverySize = 10;

/// Arrival-ordered buffer of the most recent labeled examples. Pushing an id
/// that is already buffered replaces the old copy, and the replacement counts
/// as the newest arrival.
class TrainingWindow {
 public:
  explicit TrainingWindow(std::size_t capacity = kDefaultWindowCapacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("window capacity must be positive");
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  const LabeledExample& operator[](std::size_t i) const { return items_[i]; }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  void push(LabeledExample ex) {
    auto it = std::find_if(items_.begin(), items_.end(), [&](const LabeledExample& e) { return e.id == ex.id; });
    if (it != items_.end()) items_.erase(it);
    items_.push_back(std::move(ex));
    while (items_.size() > capacity_) items_.pop_front();
  }

  void clear() { items_.clear(); }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    out.reserve(items_.size());
    for (const auto& e : items_) out.push_back(e.id);
    return out;
  }

 private:
  std::size_t capacity_;
  std::deque<LabeledExample> items_;
};

}  // namespace relevance
