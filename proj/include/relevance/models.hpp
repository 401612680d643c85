// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>
#include <zlib.h>

#include "relevance/embeddings.hpp"
#include "relevance/hyperparameters.hpp"
#include "relevance/labels.hpp"
#include "relevance/nn/networks.hpp"
#include "relevance/nn/optim.hpp"
#include "relevance/text.hpp"
#include "relevance/window.hpp"

namespace relevance {

inline std::int64_t now_millis() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

/// Network weights, optimizer state, sliding window and bookkeeping for one
/// (user, classifier) pair. Parameters are stored single precision.
class ClassifierModel {
 public:
  using Network = std::variant<nn::CnnNetwork<float>, nn::RecurrentNetwork<float>>;

  static ClassifierModel build(const Hyperparameters& hp, std::size_t window_capacity = kDefaultWindowCapacity) {
    hp.validate();
    ClassifierModel m;
    m.hp_ = hp;
    m.window_ = TrainingWindow(window_capacity);
    m.rng_.seed(hp.seed);
    if (hp.recurrent())
      m.net_ = nn::RecurrentNetwork<float>(recurrent_shape(hp), m.rng_);
    else
      m.net_ = nn::CnnNetwork<float>(cnn_shape(hp), m.rng_);
    m.opt_ = nn::OptimizerState<float>::zeros_like(m.parameters());
    m.created_ms_ = m.updated_ms_ = now_millis();
    return m;
  }

  static nn::CnnNetwork<float>::Shape cnn_shape(const Hyperparameters& hp) {
    return {hp.max_len, hp.embedding_dim, hp.filter_size, hp.kernel_size};
  }

  static nn::RecurrentNetwork<float>::Shape recurrent_shape(const Hyperparameters& hp) {
    return {hp.model_type == ModelType::Lstm ? nn::CellKind::Lstm : nn::CellKind::Rnn,
            hp.max_len,
            hp.embedding_dim,
            hp.hidden_size,
            hp.dropout,
            hp.recurrent_dropout};
  }

  const Hyperparameters& hyperparameters() const { return hp_; }
  std::uint64_t n_trained() const { return n_trained_; }
  const TrainingWindow& window() const { return window_; }
  TrainingWindow& window() { return window_; }
  nn::Rng& rng() { return rng_; }
  const nn::OptimizerState<float>& optimizer_state() const { return opt_; }
  std::int64_t created_ms() const { return created_ms_; }
  std::int64_t updated_ms() const { return updated_ms_; }
  const Network& network() const { return net_; }

  std::vector<nn::Tensor<float>*> parameters() {
    return std::visit([](auto& n) { return n.parameters(); }, net_);
  }
  std::vector<const nn::Tensor<float>*> parameters() const {
    return std::visit([](const auto& n) { return n.parameters(); }, net_);
  }
  std::vector<std::string> parameter_names() const {
    return std::visit([](const auto& n) { return n.parameter_names(); }, net_);
  }

  /// Dropout off, deterministic. Degenerate (length 0) input is uniform.
  LabelDistribution predict(const SentenceMatrix& m) const {
    if (m.max_len() != hp_.max_len || m.dim() != hp_.embedding_dim)
      throw nn::ShapeError("sentence matrix " + nn::shape_string(m.max_len(), m.dim()) + " does not match model input " +
                           nn::shape_string(hp_.max_len, hp_.embedding_dim));
    if (m.degenerate()) return LabelDistribution::uniform();
    auto z = std::visit([&](const auto& n) { return n.logits(m); }, net_);
    auto p = nn::softmax(z);
    LabelDistribution d;
    for (std::size_t i = 0; i < kNumClasses; ++i) d.probs[i] = p[i];
    return d;
  }

  /// One optimizer step on the mean gradient of `batch`. Returns mean loss.
  double train_step(std::span<const LabeledExample* const> batch) {
    if (batch.empty()) return 0.0;
    auto grads = nn::zero_grads(std::as_const(*this).parameters());
    double loss = 0.0;
    for (const auto* ex : batch)
      loss += std::visit(
          [&](const auto& n) { return n.accumulate_gradients(ex->matrix, index_of(ex->label), grads, &rng_); }, net_);
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (auto& g : grads)
      for (auto& v : g.values()) v *= scale;
    if (hp_.optimizer == nn::OptimizerKind::Adam)
      nn::adam_step(parameters(), std::span<const nn::Grad>(grads), opt_, nn::AdamConfig{hp_.learning_rate});
    else
      nn::adagrad_step(parameters(), std::span<const nn::Grad>(grads), opt_, nn::AdagradConfig{hp_.learning_rate});
    updated_ms_ = now_millis();
    return loss * scale;
  }

  void add_trained(std::uint64_t n) { n_trained_ += n; }

 private:
  friend void save(const ClassifierModel&, std::ostream&);
  friend ClassifierModel restore(std::istream&, const EmbeddingTable&);

  Hyperparameters hp_;
  Network net_;
  nn::OptimizerState<float> opt_;
  std::uint64_t n_trained_ = 0;
  TrainingWindow window_;
  nn::Rng rng_;
  std::int64_t created_ms_ = 0;
  std::int64_t updated_ms_ = 0;
};

inline ClassifierModel build(const Hyperparameters& hp, std::size_t window_capacity = kDefaultWindowCapacity) {
  return ClassifierModel::build(hp, window_capacity);
}

inline LabelDistribution predict(const ClassifierModel& model, const SentenceMatrix& m) { return model.predict(m); }

// ---------------------------------------------------------------------------
// Checkpoints
//
// "RLV1" | u32 metadata length | metadata JSON | float32 LE payloads
// (weights, then first moments, then second moments, each in declared
// order) | u32 CRC32 of all preceding bytes.

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { Io, Format, Version, Checksum, Truncated };
  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFFu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

inline std::uint32_t crc32_of(std::string_view bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

inline void put_tensor(std::string& out, const nn::Tensor<float>& t) {
  char buf[4];
  for (float v : t.values()) {
    float_to_le(v, buf);
    out.append(buf, 4);
  }
}

}  // namespace detail

inline void save(const ClassifierModel& m, std::ostream& out) {
  using nlohmann::json;
  json meta;
  meta["format_version"] = kCheckpointVersion;
  meta["hyperparameters"] = to_json(m.hp_);
  meta["n_trained"] = m.n_trained_;
  meta["created_ms"] = m.created_ms_;
  meta["updated_ms"] = m.updated_ms_;
  meta["optimizer_step"] = m.opt_.step;
  std::ostringstream rng_state;
  rng_state << m.rng_;
  meta["rng_state"] = rng_state.str();
  json tensors = json::array();
  auto params = m.parameters();
  auto names = m.parameter_names();
  for (std::size_t i = 0; i < params.size(); ++i)
    tensors.push_back({{"name", names[i]}, {"rows", params[i]->rows()}, {"cols", params[i]->cols()}});
  meta["tensors"] = tensors;
  json window = json::array();
  for (const auto& ex : m.window_)
    window.push_back({{"id", ex.id},
                      {"tokens", ex.tokens},
                      {"label", std::string(to_string(ex.label))},
                      {"source", std::string(to_string(ex.source))}});
  meta["window"] = window;
  meta["window_capacity"] = m.window_.capacity();

  const std::string meta_text = meta.dump();
  std::string bytes = "RLV1";
  detail::put_u32(bytes, static_cast<std::uint32_t>(meta_text.size()));
  bytes += meta_text;
  for (const auto* p : params) detail::put_tensor(bytes, *p);
  for (const auto& t : m.opt_.first) detail::put_tensor(bytes, t);
  for (const auto& t : m.opt_.second) detail::put_tensor(bytes, t);
  detail::put_u32(bytes, detail::crc32_of(bytes));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointError::Kind::Io, "checkpoint write failed");
}

/// Window examples are stored as tokens and re-vectorized against `table`.
inline ClassifierModel restore(std::istream& in, const EmbeddingTable& table) {
  using Kind = CheckpointError::Kind;
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4) throw CheckpointError(Kind::Truncated, "checkpoint truncated: missing magic");
  if (bytes.compare(0, 3, "RLV") != 0) throw CheckpointError(Kind::Format, "not a checkpoint file (bad magic)");
  if (bytes[3] != '1') {
    throw CheckpointError(Kind::Version, std::string("unsupported checkpoint format version '") + bytes[3] +
                                             "' (this build reads version " + std::to_string(kCheckpointVersion) +
                                             ")");
  }
  if (bytes.size() < 12) throw CheckpointError(Kind::Truncated, "checkpoint truncated");
  const auto* u = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t body = bytes.size() - 4;
  const std::uint32_t stored_crc = detail::get_u32(u + body);
  const std::uint32_t meta_len = detail::get_u32(u + 4);
  if (8 + std::size_t(meta_len) > body) throw CheckpointError(Kind::Truncated, "checkpoint truncated in metadata");
  if (detail::crc32_of(std::string_view(bytes.data(), body)) != stored_crc)
    throw CheckpointError(Kind::Checksum, "checkpoint checksum mismatch");

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(bytes.substr(8, meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::Format, std::string("checkpoint metadata unreadable: ") + e.what());
  }
  try {
    if (meta.at("format_version").get<std::uint32_t>() != kCheckpointVersion)
      throw CheckpointError(Kind::Version, "unsupported checkpoint metadata version " + meta.at("format_version").dump());
    auto hp = hyperparameters_from_json(meta.at("hyperparameters"));
    if (hp.embedding_dim != table.dim())
      throw CheckpointError(Kind::Format, "checkpoint expects " + std::to_string(hp.embedding_dim) +
                                              "-dimensional embeddings, table has " + std::to_string(table.dim()));
    ClassifierModel m = ClassifierModel::build(hp);
    auto params = m.parameters();
    const auto& tensors = meta.at("tensors");
    if (tensors.size() != params.size()) throw CheckpointError(Kind::Format, "checkpoint tensor count mismatch");
    std::size_t pos = 8 + meta_len;
    auto read_tensor = [&](nn::Tensor<float>& t) {
      if (pos + 4 * t.size() > body) throw CheckpointError(Kind::Truncated, "checkpoint truncated in weight payload");
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = detail::float_from_le(u + pos + 4 * i);
      pos += 4 * t.size();
    };
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (tensors[i].at("rows").get<std::size_t>() != params[i]->rows() ||
          tensors[i].at("cols").get<std::size_t>() != params[i]->cols())
        throw CheckpointError(Kind::Format, "checkpoint tensor shape mismatch for " + tensors[i].at("name").dump());
      read_tensor(*params[i]);
    }
    for (auto& t : m.opt_.first) read_tensor(t);
    for (auto& t : m.opt_.second) read_tensor(t);
    if (pos != body) throw CheckpointError(Kind::Format, "checkpoint has trailing bytes");
    m.opt_.step = meta.at("optimizer_step").get<std::uint64_t>();
    m.n_trained_ = meta.at("n_trained").get<std::uint64_t>();
    m.created_ms_ = meta.at("created_ms").get<std::int64_t>();
    m.updated_ms_ = meta.at("updated_ms").get<std::int64_t>();
    std::istringstream rs(meta.at("rng_state").get<std::string>());
    rs >> m.rng_;
    m.window_ = TrainingWindow(meta.value("window_capacity", kDefaultWindowCapacity));
    for (const auto& w : meta.at("window")) {
      auto label = parse_label(w.at("label").get<std::string>());
      if (!label) throw CheckpointError(Kind::Format, "bad label in checkpoint window");
      LabeledExample ex{w.at("id").get<std::string>(), w.at("tokens").get<std::vector<std::string>>(), {}, *label,
                        w.at("source").get<std::string>() == "dataset" ? ExampleSource::Dataset : ExampleSource::User};
      ex.matrix = to_matrix(ex.tokens, table, hp.max_len);
      m.window_.push(std::move(ex));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::Format, std::string("checkpoint metadata invalid: ") + e.what());
  } catch (const HyperparameterError& e) {
    throw CheckpointError(Kind::Format, std::string("checkpoint hyperparameters invalid: ") + e.what());
  }
}

/// Writes to a sibling temp file and renames it into place.
inline void save(const ClassifierModel& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointError::Kind::Io, "cannot write " + tmp.string());
    save(m, out);
  }
  std::filesystem::rename(tmp, path);
}

inline ClassifierModel restore(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::Io, "cannot open checkpoint " + path.string());
  return restore(in, table);
}

}  // namespace relevance
