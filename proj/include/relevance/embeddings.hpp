// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace relevance {

class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable-after-load word -> vector table. Vectors live contiguously in
/// one float buffer, `dim` values per token, in file order.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw EmbeddingError("embedding dimension must be positive");
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }

  const std::string& token(std::size_t i) const { return tokens_.at(i); }

  std::span<const float> vector(std::size_t i) const {
    if (i >= size()) throw std::out_of_range("embedding index out of range");
    return {values_.data() + i * dim_, dim_};
  }

  /// Case-sensitive exact match; absence is a value, not an error.
  std::optional<std::span<const float>> lookup(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return vector(it->second);
  }

  bool contains(std::string_view token) const { return index_.contains(std::string(token)); }

  /// Appends a token. Rejects duplicates, wrong arity and non-finite values.
  void add(std::string token, std::span<const float> values) {
    if (values.size() != dim_)
      throw EmbeddingError("vector for '" + token + "' has " + std::to_string(values.size()) +
                           " components, expected " + std::to_string(dim_));
    for (float v : values)
      if (!std::isfinite(v)) throw EmbeddingError("non-finite component in vector for '" + token + "'");
    if (index_.contains(token))
      throw EmbeddingError("duplicate token '" + token + "' at position " + std::to_string(size()));
    index_.emplace(token, tokens_.size());
    tokens_.push_back(std::move(token));
    values_.insert(values_.end(), values.begin(), values.end());
  }

  void reserve(std::size_t n) {
    tokens_.reserve(n);
    values_.reserve(n * dim_);
    index_.reserve(n);
  }

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    if (a.dim_ != b.dim_ || a.tokens_ != b.tokens_ || a.values_.size() != b.values_.size()) return false;
    // Bitwise comparison so that -0.0 and 0.0 are distinguished.
    return std::memcmp(a.values_.data(), b.values_.data(), a.values_.size() * sizeof(float)) == 0;
  }

 private:
  std::size_t dim_;
  std::vector<std::string> tokens_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline bool parse_size(std::string_view s, std::size_t& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

inline bool parse_float(std::string_view s, float& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline float float_from_le(const unsigned char* b) {
  std::uint32_t u = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
                    (std::uint32_t(b[3]) << 24);
  return std::bit_cast<float>(u);
}

inline void float_to_le(float f, char* out) {
  auto u = std::bit_cast<std::uint32_t>(f);
  for (int k = 0; k < 4; ++k) out[k] = static_cast<char>((u >> (8 * k)) & 0xFFu);
}

}  // namespace detail

/// Reads the word2vec binary layout: "<vocab_size> <dim>\n", then per word the
/// token bytes, one 0x20, dim little-endian float32 values and an optional '\n'.
inline EmbeddingTable load_binary(std::istream& in, const std::string& source = "<stream>") {
  std::string header;
  if (!std::getline(in, header)) throw EmbeddingError(source + ": missing header");
  auto fields = detail::split_ws(header);
  std::size_t vocab = 0, dim = 0;
  if (fields.size() != 2 || !detail::parse_size(fields[0], vocab) || !detail::parse_size(fields[1], dim) ||
      dim == 0)
    throw EmbeddingError(source + ": malformed header '" + header + "'");

  EmbeddingTable table(dim);
  table.reserve(vocab);
  std::vector<unsigned char> raw(dim * 4);
  std::vector<float> vec(dim);
  for (std::size_t w = 0; w < vocab; ++w) {
    std::string token;
    int c;
    // Tolerate the optional newline that terminates the previous vector.
    while ((c = in.get()) == '\n') {}
    while (c != EOF && c != ' ') {
      token.push_back(static_cast<char>(c));
      c = in.get();
    }
    if (c == EOF)
      throw EmbeddingError(source + ": truncated file, expected " + std::to_string(vocab) + " words, got " +
                           std::to_string(w) + (token.empty() ? "" : " (partial token '" + token + "')"));
    if (token.empty()) throw EmbeddingError(source + ": empty token at position " + std::to_string(w));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
      throw EmbeddingError(source + ": truncated vector payload for token '" + token + "' at position " +
                           std::to_string(w));
    for (std::size_t d = 0; d < dim; ++d) vec[d] = detail::float_from_le(raw.data() + 4 * d);
    try {
      table.add(std::move(token), vec);
    } catch (const EmbeddingError& e) {
      throw EmbeddingError(source + ": " + e.what());
    }
  }
  return table;
}

inline EmbeddingTable load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EmbeddingError("cannot open embedding file " + path.string());
  return load_binary(in, path.string());
}

/// Text layout: one "token v1 ... vdim" record per line. A leading
/// "<count> <dim>" header line is accepted and checked.
inline EmbeddingTable load_text(std::istream& in, const std::string& source = "<stream>") {
  std::optional<EmbeddingTable> table;
  std::optional<std::size_t> declared_count;
  std::string line;
  std::size_t line_no = 0;
  std::vector<float> vec;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = detail::split_ws(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2) {
      std::size_t n = 0, d = 0;
      if (detail::parse_size(fields[0], n) && detail::parse_size(fields[1], d)) {
        if (d == 0) throw EmbeddingError(source + ":1: header declares zero dimension");
        declared_count = n;
        table.emplace(d);
        continue;
      }
    }
    if (fields.size() < 2) throw EmbeddingError(source + ":" + std::to_string(line_no) + ": record has no vector");
    std::size_t dim = fields.size() - 1;
    if (!table) table.emplace(dim);
    if (dim != table->dim())
      throw EmbeddingError(source + ":" + std::to_string(line_no) + ": inconsistent dimensionality " +
                           std::to_string(dim) + " (expected " + std::to_string(table->dim()) + ")");
    vec.resize(dim);
    for (std::size_t d = 0; d < dim; ++d)
      if (!detail::parse_float(fields[d + 1], vec[d]))
        throw EmbeddingError(source + ":" + std::to_string(line_no) + ": non-numeric component '" +
                             std::string(fields[d + 1]) + "'");
    try {
      table->add(std::string(fields[0]), vec);
    } catch (const EmbeddingError& e) {
      throw EmbeddingError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!table) throw EmbeddingError(source + ": no embedding records");
  if (declared_count && *declared_count != table->size())
    throw EmbeddingError(source + ": header declares " + std::to_string(*declared_count) + " words, found " +
                         std::to_string(table->size()));
  return std::move(*table);
}

inline EmbeddingTable load_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw EmbeddingError("cannot open embedding file " + path.string());
  return load_text(in, path.string());
}

inline void save_binary(const EmbeddingTable& table, std::ostream& out) {
  out << table.size() << ' ' << table.dim() << '\n';
  std::vector<char> buf(table.dim() * 4);
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.token(i) << ' ';
    auto v = table.vector(i);
    for (std::size_t d = 0; d < v.size(); ++d) detail::float_to_le(v[d], buf.data() + 4 * d);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    out << '\n';
  }
}

inline void save_binary(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EmbeddingError("cannot write " + path.string());
  save_binary(table, out);
}

/// Shortest round-trip float formatting, so text files reload bit-exactly.
inline void save_text(const EmbeddingTable& table, std::ostream& out) {
  out << table.size() << ' ' << table.dim() << '\n';
  char buf[64];
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.token(i);
    for (float v : table.vector(i)) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(p - buf));
    }
    out << '\n';
  }
}

inline void save_text(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw EmbeddingError("cannot write " + path.string());
  save_text(table, out);
}

/// Picks the reader from the extension: ".txt"/".vec" are text, anything else binary.
inline EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw EmbeddingError("embedding file not found: " + path.string());
  auto ext = path.extension().string();
  if (ext == ".txt" || ext == ".vec") return load_text(path);
  return load_binary(path);
}

}  // namespace relevance
