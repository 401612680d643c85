// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "relevance/nn/optim.hpp"

namespace relevance {

enum class ModelType { Cnn, Lstm, Rnn };

inline std::string_view to_string(ModelType t) {
  switch (t) {
    case ModelType::Cnn: return "CNN";
    case ModelType::Lstm: return "LSTM";
    case ModelType::Rnn: return "RNN";
  }
  return "?";
}

/// Case-insensitive: "cnn", "CNN", "Lstm", ...
inline std::optional<ModelType> parse_model_type(std::string_view s) {
  std::string u;
  for (char c : s) u.push_back(static_cast<char>(c >= 'a' && c <= 'z' ? c - 'a' + 'A' : c));
  if (u == "CNN") return ModelType::Cnn;
  if (u == "LSTM") return ModelType::Lstm;
  if (u == "RNN") return ModelType::Rnn;
  return std::nullopt;
}

inline std::optional<nn::OptimizerKind> parse_optimizer(std::string_view s) {
  std::string u;
  for (char c : s) u.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
  if (u == "adam") return nn::OptimizerKind::Adam;
  if (u == "adagrad") return nn::OptimizerKind::Adagrad;
  return std::nullopt;
}

class HyperparameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Hyperparameters {
  ModelType model_type = ModelType::Cnn;
  double learning_rate = 0.0079;
  std::size_t batch_size = 10;
  std::size_t epochs = 1;
  double dropout = 0.0;            // recurrent models only
  double recurrent_dropout = 0.0;  // recurrent models only
  std::size_t filter_size = 16;    // CNN only: number of filters
  std::size_t kernel_size = 2;     // CNN only
  nn::OptimizerKind optimizer = nn::OptimizerKind::Adam;
  std::size_t hidden_size = 300;   // recurrent models only
  std::size_t max_len = 64;
  std::size_t embedding_dim = 300;
  std::uint64_t seed = 42;

  bool recurrent() const { return model_type != ModelType::Cnn; }

  void validate() const {
    auto fail = [](const std::string& m) { throw HyperparameterError(m); };
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be finite and >= 0");
    if (batch_size == 0) fail("batch_size must be positive");
    if (epochs == 0) fail("epochs must be positive");
    if (max_len == 0) fail("max_len must be positive");
    if (embedding_dim == 0) fail("embedding_dim must be positive");
    if (recurrent()) {
      if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
      if (!(recurrent_dropout >= 0.0 && recurrent_dropout < 1.0)) fail("recurrent_dropout must be in [0, 1)");
      if (hidden_size == 0) fail("hidden_size must be positive");
    } else {
      if (filter_size == 0) fail("filter_size must be positive");
      if (kernel_size == 0 || kernel_size > max_len)
        fail("kernel_size must be in [1, max_len]; got " + std::to_string(kernel_size));
    }
  }

  /// Copy with fields irrelevant to the model type reset to defaults, so two
  /// configurations that build the same network compare equal.
  Hyperparameters normalized() const {
    Hyperparameters h = *this;
    Hyperparameters d;
    if (recurrent()) {
      h.filter_size = d.filter_size;
      h.kernel_size = d.kernel_size;
    } else {
      h.dropout = d.dropout;
      h.recurrent_dropout = d.recurrent_dropout;
      h.hidden_size = d.hidden_size;
    }
    return h;
  }

  friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

/// The nine tuned configurations, top three per architecture, in the order
/// CNN rows 1-3, LSTM rows 4-6, RNN rows 7-9.
inline Hyperparameters tuned_configuration(int row) {
  struct Row {
    ModelType type;
    double lr;
    std::size_t batch, epochs;
    double dropout, rdropout;
    nn::OptimizerKind opt;
  };
  using enum nn::OptimizerKind;
  static constexpr std::array<Row, 9> rows{{
      {ModelType::Cnn, 0.0079, 10, 1, 0.0, 0.0, Adam},
      {ModelType::Cnn, 0.01, 50, 2, 0.0, 0.0, Adagrad},
      {ModelType::Cnn, 0.0063, 10, 3, 0.0, 0.0, Adam},
      {ModelType::Lstm, 0.0002, 10, 10, 0.4, 0.2, Adam},
      {ModelType::Lstm, 0.0002, 20, 8, 0.2, 0.6, Adam},
      {ModelType::Lstm, 0.0006, 100, 12, 0.6, 0.6, Adam},
      {ModelType::Rnn, 0.0001, 10, 7, 0.0, 0.2, Adam},
      {ModelType::Rnn, 0.0001, 20, 5, 0.0, 0.0, Adam},
      {ModelType::Rnn, 0.0001, 100, 12, 0.0, 0.2, Adam},
  }};
  if (row < 1 || row > 9) throw HyperparameterError("tuned configuration rows are numbered 1-9");
  const Row& r = rows[static_cast<std::size_t>(row - 1)];
  Hyperparameters h;
  h.model_type = r.type;
  h.learning_rate = r.lr;
  h.batch_size = r.batch;
  h.epochs = r.epochs;
  h.dropout = r.dropout;
  h.recurrent_dropout = r.rdropout;
  h.optimizer = r.opt;
  h.filter_size = 16;
  h.kernel_size = 2;
  return h;
}

/// Best tuned configuration per architecture (rows 1, 4, 7).
inline Hyperparameters default_hyperparameters(ModelType t) {
  switch (t) {
    case ModelType::Cnn: return tuned_configuration(1);
    case ModelType::Lstm: return tuned_configuration(4);
    case ModelType::Rnn: return tuned_configuration(7);
  }
  return tuned_configuration(1);
}

inline nlohmann::json to_json(const Hyperparameters& h) {
  return {{"model_type", std::string(to_string(h.model_type))},
          {"learning_rate", h.learning_rate},
          {"batch_size", h.batch_size},
          {"epochs", h.epochs},
          {"dropout", h.dropout},
          {"recurrent_dropout", h.recurrent_dropout},
          {"filter_size", h.filter_size},
          {"kernel_size", h.kernel_size},
          {"optimizer", std::string(nn::to_string(h.optimizer))},
          {"hidden_size", h.hidden_size},
          {"max_len", h.max_len},
          {"embedding_dim", h.embedding_dim},
          {"seed", h.seed}};
}

/// Applies the keys present in `j` on top of `base`. Unknown keys are errors.
inline Hyperparameters apply_overrides(Hyperparameters base, const nlohmann::json& j) {
  if (!j.is_object()) throw HyperparameterError("hyperparameters must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = it.value();
    auto count = [&]() -> std::size_t {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        throw HyperparameterError("hyperparameter '" + k + "' must be a non-negative integer");
      return v.get<std::size_t>();
    };
    try {
      if (k == "model_type") {
        auto t = parse_model_type(v.get<std::string>());
        if (!t) throw HyperparameterError("unknown model_type " + v.dump());
        base.model_type = *t;
      } else if (k == "optimizer") {
        auto o = parse_optimizer(v.get<std::string>());
        if (!o) throw HyperparameterError("unknown optimizer " + v.dump());
        base.optimizer = *o;
      } else if (k == "learning_rate") base.learning_rate = v.get<double>();
      else if (k == "batch_size") base.batch_size = count();
      else if (k == "epochs") base.epochs = count();
      else if (k == "dropout") base.dropout = v.get<double>();
      else if (k == "recurrent_dropout") base.recurrent_dropout = v.get<double>();
      else if (k == "filter_size") base.filter_size = count();
      else if (k == "kernel_size") base.kernel_size = count();
      else if (k == "hidden_size") base.hidden_size = count();
      else if (k == "max_len") base.max_len = count();
      else if (k == "embedding_dim") base.embedding_dim = count();
      else if (k == "seed") base.seed = count();
      else throw HyperparameterError("unknown hyperparameter '" + k + "'");
    } catch (const nlohmann::json::exception&) {
      throw HyperparameterError("hyperparameter '" + k + "' has the wrong type: " + v.dump());
    }
  }
  return base;
}

inline Hyperparameters hyperparameters_from_json(const nlohmann::json& j) {
  return apply_overrides(Hyperparameters{}, j);
}

}  // namespace relevance
