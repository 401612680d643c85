// SPDX-License-Identifier: Apache-2.0
//
// Incremental training protocol: labeled examples arrive in small batches,
// join a bounded sliding window, and the model retrains for `epochs` passes
// over the window contents after every delivery.
#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <functional>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "relevance/embeddings.hpp"
#include "relevance/labels.hpp"
#include "relevance/metrics.hpp"
#include "relevance/models.hpp"
#include "relevance/text.hpp"
#include "relevance/window.hpp"

namespace relevance {

class TrainingError : public std::runtime_error {
 public:
  enum class Kind { EmptyBatch, AllDegenerate, BatchTooLarge };
  TrainingError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct TrainReport {
  std::uint64_t n_trained = 0;
  std::size_t accepted = 0;
  std::vector<std::string> rejected_ids;  // degenerate examples
  std::vector<double> loss_trace;         // mean loss per mini-batch step
  double seconds = 0.0;
};

/// Adds `batch` to the model's window and retrains on the window.
/// Within a batch the last label for an id wins; across batches the window
/// keeps one copy per id carrying the latest label.
inline TrainReport submit_labels(ClassifierModel& model, std::vector<LabeledExample> batch) {
  const auto start = std::chrono::steady_clock::now();
  if (batch.empty()) throw TrainingError(TrainingError::Kind::EmptyBatch, "empty training batch");
  const std::size_t capacity = model.window().capacity();

  std::unordered_map<std::string, std::size_t> last;
  for (std::size_t i = 0; i < batch.size(); ++i) last[batch[i].id] = i;
  TrainReport report;
  std::vector<LabeledExample> accepted;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (last[batch[i].id] != i) continue;
    if (batch[i].matrix.degenerate()) {
      report.rejected_ids.push_back(batch[i].id);
      continue;
    }
    accepted.push_back(std::move(batch[i]));
  }
  if (accepted.size() > capacity)
    throw TrainingError(TrainingError::Kind::BatchTooLarge, "batch of " + std::to_string(accepted.size()) +
                                                                " examples exceeds window capacity " +
                                                                std::to_string(capacity));
  if (accepted.empty())
    throw TrainingError(TrainingError::Kind::AllDegenerate,
                        "no example in the batch has an embeddable token (" + std::to_string(report.rejected_ids.size()) +
                            " rejected)");

  report.accepted = accepted.size();
  for (auto& ex : accepted) model.window().push(std::move(ex));

  const auto& hp = model.hyperparameters();
  const auto& window = model.window();
  std::vector<std::size_t> order(window.size());
  std::vector<const LabeledExample*> minibatch;
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), model.rng());
    for (std::size_t begin = 0; begin < order.size(); begin += hp.batch_size) {
      minibatch.clear();
      for (std::size_t k = begin; k < std::min(order.size(), begin + hp.batch_size); ++k)
        minibatch.push_back(&window[order[k]]);
      report.loss_trace.push_back(model.train_step(minibatch));
    }
  }
  model.add_trained(report.accepted);
  report.n_trained = model.n_trained();
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

struct Prediction {
  RelevanceLabel label = RelevanceLabel::CantDecide;
  LabelDistribution distribution;
  std::optional<std::string> diagnostic;
};

/// Degenerate inputs get the uniform distribution and the Can't Decide label.
inline Prediction predict_one(const ClassifierModel& model, const SentenceMatrix& m) {
  if (m.degenerate()) return {RelevanceLabel::CantDecide, LabelDistribution::uniform(), "no embeddable tokens"};
  auto d = model.predict(m);
  return {d.argmax(), d, std::nullopt};
}

inline std::vector<Prediction> predict_batch(const ClassifierModel& model, const std::vector<std::string>& texts,
                                             const EmbeddingTable& table) {
  std::vector<Prediction> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    try {
      out.push_back(predict_one(model, vectorize(t, table, model.hyperparameters().max_len)));
    } catch (const std::exception& e) {
      out.push_back({RelevanceLabel::CantDecide, LabelDistribution::uniform(), std::string(e.what())});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stream simulation

struct IterationResult {
  std::size_t iteration = 0;  // 1-based
  std::size_t n_tweets = 0;   // labels delivered so far
  ScoreTriple scores;
  double cpu_seconds = 0.0;
  double mean_loss = 0.0;
  bool trained = true;  // false when the whole chunk was degenerate
};

struct SimulationReport {
  std::vector<IterationResult> iterations;
  ScoreTriple average;
  double total_cpu_seconds = 0.0;
  std::optional<TrendlineFit> trend;  // needs at least two iterations
  ScoreMode mode = ScoreMode::Macro;
  nlohmann::json config;
};

struct SimulationOptions {
  std::size_t delivery_size = kDefaultDeliverySize;
  ScoreMode mode = ScoreMode::Macro;
  bool measure_cpu = true;
  std::function<void(const IterationResult&)> on_iteration;
};

inline ScoreTriple evaluate(const ClassifierModel& model, const std::vector<LabeledExample>& test, ScoreMode mode) {
  std::vector<RelevanceLabel> truth, pred;
  truth.reserve(test.size());
  pred.reserve(test.size());
  for (const auto& ex : test) {
    truth.push_back(ex.label);
    pred.push_back(predict_one(model, ex.matrix).label);
  }
  return score(confusion(truth, pred), mode);
}

/// CPU time of the calling thread. A simulation runs on one thread, so this
/// equals its process CPU time and stays meaningful when runs are parallel.
inline double cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + static_cast<double>(ts.tv_nsec) * 1e-9;
}

/// Feeds `train` to the model `delivery_size` examples at a time and scores
/// the full `test` set after each delivery. A trailing partial chunk is not
/// delivered.
inline SimulationReport simulate_stream(ClassifierModel& model, const std::vector<LabeledExample>& train,
                                        const std::vector<LabeledExample>& test, const SimulationOptions& opt = {}) {
  if (train.empty() || test.empty()) throw std::invalid_argument("simulate_stream: empty train or test set");
  if (opt.delivery_size == 0) throw std::invalid_argument("simulate_stream: delivery size must be positive");
  if (train.size() < opt.delivery_size)
    throw std::invalid_argument("simulate_stream: train set smaller than one delivery");
  std::unordered_set<std::string> test_ids;
  for (const auto& ex : test) test_ids.insert(ex.id);
  for (const auto& ex : train)
    if (test_ids.contains(ex.id)) throw std::invalid_argument("simulate_stream: id '" + ex.id + "' is in both sets");

  SimulationReport report;
  report.mode = opt.mode;
  report.config = {{"hyperparameters", to_json(model.hyperparameters())},
                   {"delivery_size", opt.delivery_size},
                   {"window_capacity", model.window().capacity()},
                   {"train_size", train.size()},
                   {"test_size", test.size()},
                   {"score_mode", std::string(to_string(opt.mode))}};
  const std::size_t iterations = train.size() / opt.delivery_size;
  std::vector<ScoreTriple> scores;
  std::vector<TrendPoint> points;
  for (std::size_t k = 0; k < iterations; ++k) {
    const double cpu0 = opt.measure_cpu ? cpu_seconds() : 0.0;
    IterationResult it;
    it.iteration = k + 1;
    it.n_tweets = (k + 1) * opt.delivery_size;
    std::vector<LabeledExample> chunk(train.begin() + static_cast<std::ptrdiff_t>(k * opt.delivery_size),
                                      train.begin() + static_cast<std::ptrdiff_t>((k + 1) * opt.delivery_size));
    try {
      auto tr = submit_labels(model, std::move(chunk));
      if (!tr.loss_trace.empty())
        it.mean_loss = std::accumulate(tr.loss_trace.begin(), tr.loss_trace.end(), 0.0) /
                       static_cast<double>(tr.loss_trace.size());
    } catch (const TrainingError& e) {
      if (e.kind() != TrainingError::Kind::AllDegenerate) throw;
      it.trained = false;
    }
    it.scores = evaluate(model, test, opt.mode);
    it.cpu_seconds = opt.measure_cpu ? cpu_seconds() - cpu0 : 0.0;
    report.total_cpu_seconds += it.cpu_seconds;
    scores.push_back(it.scores);
    points.push_back({static_cast<double>(it.n_tweets), it.scores.f1});
    if (opt.on_iteration) opt.on_iteration(it);
    report.iterations.push_back(it);
  }
  report.average = average_f1(scores);
  if (points.size() >= 2) report.trend = fit_log(points, report.average.f1);
  return report;
}

}  // namespace relevance
