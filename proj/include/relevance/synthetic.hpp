// SPDX-License-Identifier: Apache-2.0
//
// Generated corpora for tests and demos: a relevant text contains the marker
// token, a non-relevant one does not.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "relevance/embeddings.hpp"
#include "relevance/simulation.hpp"

namespace relevance {

struct SyntheticSpec {
  std::size_t examples = 2000;
  std::size_t dim = 8;
  std::size_t vocabulary = 200;  // filler words
  std::size_t min_words = 4;
  std::size_t max_words = 12;
  double relevant_fraction = 0.5;
  std::string marker = "flood";
  std::uint64_t seed = 7;
};

/// Filler words "w0".."w{V-1}" get N(0,1) components except component 0,
/// which is reserved for the marker: marker = (3, 0, ..., 0).
inline EmbeddingTable synthetic_embeddings(const SyntheticSpec& s) {
  std::mt19937_64 rng(s.seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  EmbeddingTable table(s.dim);
  std::vector<float> v(s.dim);
  for (std::size_t w = 0; w <= s.vocabulary; ++w) {
    for (auto& x : v) x = normal(rng);
    v[0] = 0.0f;
    if (w == s.vocabulary) {
      std::fill(v.begin(), v.end(), 0.0f);
      v[0] = 3.0f;
    }
    table.add(w < s.vocabulary ? "w" + std::to_string(w) : s.marker, v);
  }
  return table;
}

inline Corpus synthetic_corpus(const SyntheticSpec& s) {
  std::mt19937_64 rng(s.seed ^ 0x9E3779B97F4A7C15ull);
  std::uniform_int_distribution<std::size_t> word(0, s.vocabulary - 1);
  std::uniform_int_distribution<std::size_t> length(s.min_words, s.max_words);
  std::bernoulli_distribution relevant(s.relevant_fraction);
  Corpus c{"synthetic", {}};
  c.examples.reserve(s.examples);
  for (std::size_t i = 0; i < s.examples; ++i) {
    const bool rel = relevant(rng);
    std::vector<std::string> words(length(rng));
    for (auto& w : words) w = "w" + std::to_string(word(rng));
    if (rel) words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)] = s.marker;
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    c.examples.push_back({"s" + std::to_string(i), text, rel ? RelevanceLabel::Relevant : RelevanceLabel::NotRelevant});
  }
  return c;
}

}  // namespace relevance
