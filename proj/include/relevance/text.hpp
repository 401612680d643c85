// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "relevance/embeddings.hpp"
#include "relevance/nn/tensor.hpp"

namespace relevance {

/// Lowercase [a-z0-9] words separated by single spaces, no leading/trailing space.
struct CleanText {
  std::string text;
  friend bool operator==(const CleanText&, const CleanText&) = default;
};

/// Normalizes raw post text. Rules apply in order: drop URLs, drop @mentions,
/// drop the '#' marker but keep the tag word, turn remaining symbols into
/// separators (apostrophes are deleted so "don't" stays one word), lowercase,
/// collapse whitespace. Non-ASCII bytes count as symbols.
inline CleanText clean(std::string_view raw) {
  static const std::regex url(R"((?:https?://|www\.)\S*)", std::regex::icase);
  static const std::regex mention(R"(@\w*)");
  std::string s = std::regex_replace(std::string(raw), url, " ");
  s = std::regex_replace(s, mention, " ");

  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto c = static_cast<unsigned char>(s[i]);
    if (c == '\'') continue;
    // U+2019 right single quotation mark
    if (c == 0xE2 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x80 &&
        static_cast<unsigned char>(s[i + 2]) == 0x99) {
      i += 2;
      continue;
    }
    bool alnum = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    if (!alnum) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
  }
  return {std::move(out)};
}

inline std::vector<std::string> tokenize(const CleanText& text) {
  std::vector<std::string> tokens;
  std::string_view s = text.text;
  std::size_t i = 0;
  while (i < s.size()) {
    auto j = s.find(' ', i);
    if (j == std::string_view::npos) j = s.size();
    if (j > i) tokens.emplace_back(s.substr(i, j - i));
    i = j + 1;
  }
  return tokens;
}

/// max_len x dim word-vector matrix. Rows [0, length) hold embeddings of the
/// embeddable tokens in order; the rest are zero padding.
struct SentenceMatrix {
  nn::Tensor<float> rows;
  std::size_t length = 0;

  std::size_t max_len() const { return rows.rows(); }
  std::size_t dim() const { return rows.cols(); }
  bool is_real(std::size_t i) const { return i < length; }
  bool degenerate() const { return length == 0; }

  friend bool operator==(const SentenceMatrix&, const SentenceMatrix&) = default;
};

inline SentenceMatrix to_matrix(const std::vector<std::string>& tokens, const EmbeddingTable& table,
                                std::size_t max_len) {
  if (max_len == 0) throw std::invalid_argument("max_len must be positive");
  SentenceMatrix m{nn::Tensor<float>(max_len, table.dim()), 0};
  for (const auto& tok : tokens) {
    if (m.length == max_len) break;
    auto v = table.lookup(tok);
    if (!v) continue;  // OOV tokens are skipped
    std::copy(v->begin(), v->end(), m.rows.row(m.length).begin());
    ++m.length;
  }
  return m;
}

/// clean -> tokenize -> to_matrix.
inline SentenceMatrix vectorize(std::string_view raw, const EmbeddingTable& table, std::size_t max_len) {
  return to_matrix(tokenize(clean(raw)), table, max_len);
}

}  // namespace relevance
