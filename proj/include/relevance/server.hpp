// SPDX-License-Identifier: Apache-2.0
//
// HTTP service: a registry of per-(user, classifier) models persisted under
// a data directory, JSON endpoints for init / prediction / training, and a
// paced replay streamer that feeds historical texts to a sink.
#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>
#include <zlib.h>

#include "relevance/embeddings.hpp"
#include "relevance/hyperparameters.hpp"
#include "relevance/metrics.hpp"
#include "relevance/models.hpp"
#include "relevance/trainer.hpp"

namespace relevance {

using nlohmann::json;

struct ModelKey {
  std::string user_id;
  std::string classifier_id;
  friend auto operator<=>(const ModelKey&, const ModelKey&) = default;
};

/// Maps an id onto [A-Za-z0-9_-]. Ids that needed changes get a CRC suffix
/// so that distinct ids keep distinct file names.
inline std::string sanitize_id(std::string_view id) {
  std::string out;
  bool changed = false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    out.push_back(ok ? c : '_');
    changed |= !ok;
  }
  if (changed) {
    char buf[16];
    const auto crc = ::crc32(0L, reinterpret_cast<const Bytef*>(id.data()), static_cast<uInt>(id.size()));
    std::snprintf(buf, sizeof buf, "-%08lx", static_cast<unsigned long>(crc));
    out += buf;
  }
  return out;
}

struct ServiceConfig {
  std::filesystem::path data_dir = "data";
  std::size_t max_batch = 1000;
  std::size_t window_capacity = kDefaultWindowCapacity;
  PerformanceEstimator estimator;
  std::size_t stream_capacity = 10000;  // buffered replay items
};

struct Response {
  int status = 200;
  json body;
};

/// Wire rounding: six decimals, with the largest entry absorbing the
/// rounding residue so the three values still sum to one.
inline std::array<double, kNumClasses> wire_probs(const LabelDistribution& d) {
  std::array<double, kNumClasses> p;
  std::size_t top = 0;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    p[i] = std::round(d.probs[i] * 1e6) / 1e6;
    if (d.probs[i] > d.probs[top]) top = i;
  }
  double rest = 0.0;
  for (std::size_t i = 0; i < kNumClasses; ++i)
    if (i != top) rest += p[i];
  p[top] = std::round((1.0 - rest) * 1e6) / 1e6;
  return p;
}

/// Buffer of replayed texts. Posting an id that is already buffered is a
/// no-op, which makes sink retries idempotent.
class StreamBuffer {
 public:
  explicit StreamBuffer(std::size_t capacity) : capacity_(capacity) {}

  std::size_t ingest(const std::vector<std::pair<std::string, std::string>>& items) {
    std::lock_guard lock(mu_);
    std::size_t added = 0;
    for (const auto& [id, text] : items) {
      if (!seen_.insert(id).second) continue;
      items_.push_back({next_seq_++, id, text});
      ++added;
      while (items_.size() > capacity_) items_.pop_front();
    }
    return added;
  }

  json poll(std::uint64_t after, std::size_t limit) const {
    std::lock_guard lock(mu_);
    json out = json::array();
    for (const auto& it : items_) {
      if (it.seq <= after) continue;
      if (out.size() >= limit) break;
      out.push_back({{"seq", it.seq}, {"id", it.id}, {"text", it.text}});
    }
    return {{"items", out}, {"next_seq", next_seq_}};
  }

 private:
  struct Item {
    std::uint64_t seq;
    std::string id;
    std::string text;
  };
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::deque<Item> items_;
  std::unordered_set<std::string> seen_;
  std::uint64_t next_seq_ = 1;
};

class RequestError : public std::runtime_error {
 public:
  RequestError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

/// Endpoint logic, independent of the HTTP transport. Per model, training
/// holds an exclusive lock and prediction a shared one, so a prediction
/// issued after a training response sees the new weights.
class RelevanceService {
 public:
  RelevanceService(ServiceConfig config, std::shared_ptr<const EmbeddingTable> table)
      : config_(std::move(config)), table_(std::move(table)), stream_(config_.stream_capacity) {
    if (!table_) throw std::invalid_argument("service needs an embedding table");
  }

  const ServiceConfig& config() const { return config_; }
  const EmbeddingTable& table() const { return *table_; }

  std::filesystem::path checkpoint_path(const ModelKey& k) const {
    return config_.data_dir / sanitize_id(k.user_id) / (sanitize_id(k.classifier_id) + ".rlv");
  }

  Response dispatch(std::string_view method, std::string_view path, const std::string& body,
                    const std::multimap<std::string, std::string>& query = {}) {
    std::string p(path);
    if (p.empty() || p.back() != '/') p.push_back('/');
    try {
      if (method == "GET" && p == "/healthz/") return {200, {{"status", "ok"}}};
      if (method == "GET" && p == "/stream/") return poll_stream(query);
      if (method != "POST") throw RequestError(405, "method not allowed");
      const json req = parse_body(body);
      if (p == "/init/") return init(req);
      if (p == "/getLabels/") return get_labels(req);
      if (p == "/updateLabels/") return update_labels(req);
      if (p == "/stream/") return ingest_stream(req);
      throw RequestError(404, "no such endpoint " + std::string(path));
    } catch (const RequestError& e) {
      return {e.status(), {{"error", e.what()}}};
    } catch (const std::exception& e) {
      return {500, {{"error", e.what()}}};
    }
  }

  /// Saves every loaded model. Updates are already persisted before they are
  /// acknowledged, so this only matters for external callers.
  void flush() {
    std::vector<std::pair<ModelKey, std::shared_ptr<Entry>>> all;
    {
      std::lock_guard lock(registry_mu_);
      all.assign(entries_.begin(), entries_.end());
    }
    for (auto& [key, e] : all) {
      std::shared_lock lock(e->mu);
      if (e->model) save(*e->model, checkpoint_path(key));
    }
  }

  Response init(const json& req) {
    const ModelKey key = parse_key(req, /*nested=*/false);
    std::optional<Hyperparameters> requested;
    if (req.contains("model_type") || req.contains("hyperparameters")) {
      try {
        ModelType type = ModelType::Cnn;
        if (req.contains("model_type")) {
          auto t = req["model_type"].is_string() ? parse_model_type(req["model_type"].get<std::string>()) : std::nullopt;
          if (!t) throw RequestError(400, "unknown model_type " + req["model_type"].dump());
          type = *t;
        }
        Hyperparameters hp = default_hyperparameters(type);
        hp.embedding_dim = table_->dim();
        if (req.contains("hyperparameters")) hp = apply_overrides(hp, req["hyperparameters"]);
        if (hp.embedding_dim != table_->dim())
          throw RequestError(400, "embedding_dim " + std::to_string(hp.embedding_dim) +
                                      " does not match the loaded embeddings (" + std::to_string(table_->dim()) + ")");
        hp.validate();
        requested = hp.normalized();
      } catch (const HyperparameterError& e) {
        throw RequestError(400, e.what());
      }
    }
    auto entry = lookup(key);
    std::unique_lock lock(entry->mu);
    bool created = false;
    if (!entry->model) load_locked(key, *entry);
    if (entry->model) {
      if (requested && entry->model->hyperparameters().normalized() != *requested)
        throw RequestError(409, "model exists with different hyperparameters: " +
                                    to_json(entry->model->hyperparameters()).dump());
    } else {
      Hyperparameters hp = requested.value_or([&] {
        auto d = default_hyperparameters(ModelType::Cnn);
        d.embedding_dim = table_->dim();
        return d;
      }());
      auto model = ClassifierModel::build(hp, config_.window_capacity);
      save(model, checkpoint_path(key));
      entry->model = std::move(model);
      created = true;
    }
    return {200,
            {{"model_key", key_json(key)},
             {"created", created},
             {"model_type", std::string(to_string(entry->model->hyperparameters().model_type))},
             {"hyperparameters", to_json(entry->model->hyperparameters())},
             {"n_trained", entry->model->n_trained()}}};
  }

  Response get_labels(const json& req) {
    const ModelKey key = parse_key(req, /*nested=*/true);
    if (!req.contains("tweets") || !req["tweets"].is_array()) throw RequestError(400, "'tweets' must be an array");
    const auto& tweets = req["tweets"];
    if (tweets.size() > config_.max_batch)
      throw RequestError(413, std::to_string(tweets.size()) + " tweets exceed max_batch " +
                                  std::to_string(config_.max_batch));
    std::vector<std::string> texts;
    texts.reserve(tweets.size());
    for (const auto& t : tweets) {
      if (!t.is_object() || !t.contains("id") || !t.contains("text") || !t["text"].is_string())
        throw RequestError(400, "each tweet needs 'id' and string 'text'");
      texts.push_back(t["text"].get<std::string>());
    }
    auto entry = existing(key);
    std::shared_lock lock(entry->mu);
    const auto& model = *entry->model;
    auto preds = predict_batch(model, texts, *table_);
    json labels = json::array();
    for (std::size_t i = 0; i < preds.size(); ++i) {
      auto p = wire_probs(preds[i].distribution);
      labels.push_back({{"id", tweets[i]["id"]},
                        {"label", std::string(to_string(preds[i].label))},
                        {"probs", {p[0], p[1], p[2]}}});
    }
    return {200, {{"labels", labels}, {"n_trained", model.n_trained()}, {"estimated_f1", wire_f1(model.n_trained())}}};
  }

  Response update_labels(const json& req) {
    const ModelKey key = parse_key(req, /*nested=*/true);
    if (!req.contains("examples") || !req["examples"].is_array()) throw RequestError(400, "'examples' must be an array");
    const auto& raw = req["examples"];
    if (raw.empty()) throw RequestError(400, "'examples' is empty");
    if (raw.size() > config_.max_batch)
      throw RequestError(413, std::to_string(raw.size()) + " examples exceed max_batch " +
                                  std::to_string(config_.max_batch));
    struct Parsed {
      std::string id, text;
      RelevanceLabel label;
    };
    std::vector<Parsed> parsed;
    for (const auto& e : raw) {
      if (!e.is_object() || !e.contains("id") || !e.contains("text") || !e["text"].is_string() || !e.contains("label"))
        throw RequestError(400, "each example needs 'id', string 'text' and 'label'");
      const std::string id = id_string(e["id"]);
      auto label = e["label"].is_string() ? parse_label(e["label"].get<std::string>()) : std::nullopt;
      if (!label) throw RequestError(400, "example '" + id + "' has invalid label " + e["label"].dump());
      parsed.push_back({id, e["text"].get<std::string>(), *label});
    }

    auto entry = existing(key);
    std::unique_lock lock(entry->mu);
    // Train a copy so a failed save leaves the served model untouched.
    ClassifierModel model = *entry->model;
    std::vector<LabeledExample> batch;
    for (const auto& p : parsed)
      batch.push_back(make_example(p.id, p.text, p.label, *table_, model.hyperparameters().max_len));
    TrainReport report;
    try {
      report = submit_labels(model, std::move(batch));
    } catch (const TrainingError& e) {
      if (e.kind() == TrainingError::Kind::AllDegenerate) throw RequestError(422, e.what());
      if (e.kind() == TrainingError::Kind::BatchTooLarge) throw RequestError(413, e.what());
      throw RequestError(400, e.what());
    }
    save(model, checkpoint_path(key));
    entry->model = std::move(model);
    return {200,
            {{"status", "ok"},
             {"n_trained", report.n_trained},
             {"accepted", report.accepted},
             {"rejected", report.rejected_ids},
             {"estimated_f1", wire_f1(report.n_trained)},
             {"train_seconds", report.seconds}}};
  }

  StreamBuffer& stream() { return stream_; }

 private:
  struct Entry {
    std::shared_mutex mu;
    std::optional<ClassifierModel> model;
  };

  static json parse_body(const std::string& body) {
    try {
      return json::parse(body.empty() ? std::string("{}") : body);
    } catch (const json::parse_error& e) {
      throw RequestError(400, std::string("malformed JSON body: ") + e.what());
    }
  }

  static std::string id_string(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

  static json key_json(const ModelKey& k) { return {{"user_id", k.user_id}, {"classifier_id", k.classifier_id}}; }

  /// Accepts {"model_key": {user_id, classifier_id}} or the two fields at the
  /// top level.
  static ModelKey parse_key(const json& req, bool nested) {
    if (!req.is_object()) throw RequestError(400, "request body must be a JSON object");
    const json* src = &req;
    if (req.contains("model_key")) src = &req["model_key"];
    else if (nested && !req.contains("user_id")) throw RequestError(400, "missing 'model_key'");
    auto get = [&](const char* name) {
      if (!src->is_object() || !src->contains(name) || !(*src)[name].is_string() ||
          (*src)[name].get<std::string>().empty())
        throw RequestError(400, std::string("'") + name + "' must be a non-empty string");
      return (*src)[name].get<std::string>();
    };
    return {get("user_id"), get("classifier_id")};
  }

  double wire_f1(std::uint64_t n) const { return std::round(config_.estimator(n) * 1e4) / 1e4; }

  std::shared_ptr<Entry> lookup(const ModelKey& key) {
    std::lock_guard lock(registry_mu_);
    auto& e = entries_[key];
    if (!e) e = std::make_shared<Entry>();
    return e;
  }

  void load_locked(const ModelKey& key, Entry& e) {
    const auto path = checkpoint_path(key);
    if (std::filesystem::exists(path)) e.model = restore(path, *table_);
  }

  /// Registered or restorable model; 404 otherwise.
  std::shared_ptr<Entry> existing(const ModelKey& key) {
    auto e = lookup(key);
    {
      std::shared_lock lock(e->mu);
      if (e->model) return e;
    }
    std::unique_lock lock(e->mu);
    if (!e->model) load_locked(key, *e);
    if (!e->model) throw RequestError(404, "unknown model " + key_json(key).dump());
    return e;
  }

  Response ingest_stream(const json& req) {
    if (!req.contains("items") || !req["items"].is_array()) throw RequestError(400, "'items' must be an array");
    std::vector<std::pair<std::string, std::string>> items;
    for (const auto& it : req["items"]) {
      if (!it.is_object() || !it.contains("id") || !it.contains("text") || !it["text"].is_string())
        throw RequestError(400, "each item needs 'id' and string 'text'");
      items.emplace_back(id_string(it["id"]), it["text"].get<std::string>());
    }
    return {200, {{"accepted", stream_.ingest(items)}}};
  }

  Response poll_stream(const std::multimap<std::string, std::string>& query) {
    auto number = [&](const char* name, std::uint64_t fallback) {
      auto it = query.find(name);
      if (it == query.end()) return fallback;
      try {
        return static_cast<std::uint64_t>(std::stoull(it->second));
      } catch (const std::exception&) {
        throw RequestError(400, std::string("query parameter '") + name + "' must be a non-negative integer");
      }
    };
    return {200, stream_.poll(number("after", 0), static_cast<std::size_t>(number("limit", 100)))};
  }

  ServiceConfig config_;
  std::shared_ptr<const EmbeddingTable> table_;
  std::mutex registry_mu_;
  std::map<ModelKey, std::shared_ptr<Entry>> entries_;
  StreamBuffer stream_;
};

/// Routes every endpoint of `service` on `server`, with and without the
/// trailing slash.
inline void bind_routes(httplib::Server& server, RelevanceService& service) {
  auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
    std::multimap<std::string, std::string> query(req.params.begin(), req.params.end());
    auto r = service.dispatch(req.method, req.path, req.body, query);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  for (const char* path : {"/init/", "/getLabels/", "/updateLabels/", "/stream/", "/init", "/getLabels",
                           "/updateLabels", "/stream"})
    server.Post(path, handler);
  for (const char* path : {"/healthz", "/healthz/", "/stream", "/stream/"}) server.Get(path, handler);
}

// ---------------------------------------------------------------------------
// Replay

struct ReplayItem {
  std::string id;
  std::string text;
};

/// Delivers one item; throws on failure.
using ReplaySink = std::function<void(const ReplayItem&)>;

struct RetryPolicy {
  std::size_t attempts = 5;
  std::chrono::milliseconds initial_backoff{100};
  double factor = 2.0;
};

/// POSTs each item to `<base_url>/stream/`.
inline ReplaySink http_sink(const std::string& base_url) {
  auto client = std::make_shared<httplib::Client>(base_url);
  client->set_connection_timeout(2);
  return [client](const ReplayItem& item) {
    json body = {{"items", json::array({{{"id", item.id}, {"text", item.text}}})}};
    auto res = client->Post("/stream/", body.dump(), "application/json");
    if (!res) throw std::runtime_error("replay sink unreachable: " + httplib::to_string(res.error()));
    if (res->status / 100 != 2) throw std::runtime_error("replay sink returned HTTP " + std::to_string(res->status));
  };
}

/// Emits items in order at `rate` items per second on a background thread.
/// Pausing stops the clock; after resume the schedule continues where it
/// left off. A sink failure is retried with exponential backoff, and once
/// the attempts are exhausted the stream stops and error() reports it.
class ReplayStream {
 public:
  ReplayStream(std::vector<ReplayItem> items, double rate, ReplaySink sink, RetryPolicy retry = {})
      : items_(std::move(items)), rate_(rate), sink_(std::move(sink)), retry_(retry) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw std::invalid_argument("replay rate must be positive");
    if (!sink_) throw std::invalid_argument("replay needs a sink");
    if (retry_.attempts == 0) throw std::invalid_argument("replay needs at least one delivery attempt");
  }

  ~ReplayStream() {
    stop();
    if (thread_.joinable()) thread_.join();
  }

  ReplayStream(const ReplayStream&) = delete;
  ReplayStream& operator=(const ReplayStream&) = delete;

  void start() {
    std::lock_guard lock(mu_);
    if (thread_.joinable()) throw std::logic_error("replay already started");
    thread_ = std::thread([this] { run(); });
  }

  void pause() {
    std::lock_guard lock(mu_);
    if (!paused_) {
      paused_ = true;
      paused_at_ = Clock::now();
    }
  }

  void resume() {
    {
      std::lock_guard lock(mu_);
      if (paused_) {
        paused_ = false;
        origin_ += Clock::now() - paused_at_;
      }
    }
    cv_.notify_all();
  }

  void stop() {
    {
      std::lock_guard lock(mu_);
      stopped_ = true;
    }
    cv_.notify_all();
  }

  /// Blocks until the corpus is exhausted, the stream is stopped, or the
  /// sink fails for good.
  void wait() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return finished_; });
  }

  std::size_t delivered() const { return delivered_.load(); }
  bool finished() const {
    std::lock_guard lock(mu_);
    return finished_;
  }
  std::optional<std::string> error() const {
    std::lock_guard lock(mu_);
    return error_;
  }

 private:
  using Clock = std::chrono::steady_clock;

  void run() {
    {
      std::lock_guard lock(mu_);
      origin_ = Clock::now();
    }
    for (std::size_t i = 0; i < items_.size(); ++i) {
      bool stopped = false;
      {
        std::unique_lock lock(mu_);
        for (;;) {
          if (stopped_) {
            stopped = true;
            break;
          }
          if (paused_) {
            cv_.wait(lock);
            continue;
          }
          const auto due = origin_ + std::chrono::duration_cast<Clock::duration>(
                                         std::chrono::duration<double>(static_cast<double>(i) / rate_));
          if (Clock::now() >= due) break;
          cv_.wait_until(lock, due);
        }
      }
      if (stopped || !deliver(items_[i])) break;
      delivered_.fetch_add(1);
    }
    finish();
  }

  bool deliver(const ReplayItem& item) {
    auto backoff = retry_.initial_backoff;
    for (std::size_t attempt = 1;; ++attempt) {
      try {
        sink_(item);
        return true;
      } catch (const std::exception& e) {
        if (attempt >= retry_.attempts) {
          std::lock_guard lock(mu_);
          error_ = "item '" + item.id + "' not delivered after " + std::to_string(attempt) + " attempts: " + e.what();
          return false;
        }
      }
      std::unique_lock lock(mu_);
      if (cv_.wait_for(lock, backoff, [&] { return stopped_; })) return false;
      backoff = std::chrono::duration_cast<std::chrono::milliseconds>(backoff * retry_.factor);
    }
  }

  void finish() {
    {
      std::lock_guard lock(mu_);
      finished_ = true;
    }
    cv_.notify_all();
  }

  std::vector<ReplayItem> items_;
  double rate_;
  ReplaySink sink_;
  RetryPolicy retry_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::thread thread_;
  Clock::time_point origin_{};
  Clock::time_point paused_at_{};
  bool paused_ = false;
  bool stopped_ = false;
  bool finished_ = false;
  std::optional<std::string> error_;
  std::atomic<std::size_t> delivered_{0};
};

}  // namespace relevance
