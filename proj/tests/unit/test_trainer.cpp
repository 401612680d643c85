// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <numeric>

#include "fixtures.hpp"
#include "generators.hpp"
#include "oracles.hpp"
#include "relevance/trainer.hpp"

using namespace relevance;
using L = RelevanceLabel;

namespace {

const EmbeddingTable& table() {
  static const auto t = fixtures::random_table(fixtures::word_list(40), 4, 1);
  return t;
}

Hyperparameters tiny_cnn(std::uint64_t seed = 42) {
  auto hp = default_hyperparameters(ModelType::Cnn);
  hp.max_len = 6;
  hp.embedding_dim = 4;
  hp.filter_size = 4;
  hp.seed = seed;
  return hp;
}

LabeledExample example(std::size_t index, L label = L::Relevant) {
  return make_example("d" + std::to_string(index), "w" + std::to_string(index % 40) + " w3", label, table(), 6,
                      ExampleSource::Dataset);
}

std::vector<LabeledExample> range(std::size_t begin, std::size_t end) {
  std::vector<LabeledExample> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(example(i, i % 2 ? L::Relevant : L::NotRelevant));
  return out;
}

std::vector<std::string> ids(std::size_t begin, std::size_t end) {
  std::vector<std::string> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back("d" + std::to_string(i));
  return out;
}

}  // namespace

TEST(Window, SlidesByDeliveries) {
  auto m = build(tiny_cnn());
  for (std::size_t k = 0; k < 21; ++k) {
    submit_labels(m, range(10 * k, 10 * k + 10));
    const std::size_t delivered = 10 * (k + 1);
    EXPECT_EQ(m.window().size(), std::min<std::size_t>(delivered, 110));
    if (k == 0) {
      EXPECT_EQ(m.window().ids(), ids(0, 10));
    }
    if (k == 5) {
      EXPECT_EQ(m.window().ids(), ids(0, 60));
    }
    if (k == 19) {
      EXPECT_EQ(m.window().ids(), ids(90, 200));
    }
  }
  EXPECT_EQ(m.window().ids(), ids(100, 210));
  EXPECT_EQ(m.n_trained(), 210u);
}

TEST(Window, HundredItemWindowFollowsPrototypeIndices) {
  auto m = ClassifierModel::build(tiny_cnn(), 100);
  for (std::size_t k = 0; k < 20; ++k) submit_labels(m, range(10 * k, 10 * k + 10));
  EXPECT_EQ(m.window().ids(), ids(100, 200));
  submit_labels(m, range(200, 210));
  EXPECT_EQ(m.window().ids(), ids(110, 210));
}

TEST(Window, RelabelKeepsOneCopyWithLatestLabel) {
  TrainingWindow w(5);
  w.push(example(1, L::Relevant));
  w.push(example(2, L::Relevant));
  w.push(example(1, L::CantDecide));
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w.ids(), (std::vector<std::string>{"d2", "d1"}));
  EXPECT_EQ(w[1].label, L::CantDecide);
  EXPECT_THROW(TrainingWindow(0), std::invalid_argument);
}

TEST(Window, PropertyMatchesOracle) {
  auto failure = testgen::for_all(100, 41, [](testgen::Gen& g, std::size_t) -> std::string {
    const std::size_t capacity = g.size(1, 30);
    TrainingWindow w(capacity);
    std::vector<std::pair<std::string, L>> history;
    for (std::size_t step = g.size(0, 120); step > 0; --step) {
      const std::size_t id = g.size(0, 50);
      const L label = g.label();
      w.push(example(id, label));
      history.emplace_back("d" + std::to_string(id), label);
      if (w.size() > capacity) return "capacity exceeded";
    }
    auto expect = oracle::window_after(history, capacity);
    if (expect.size() != w.size()) return "size mismatch";
    for (std::size_t i = 0; i < expect.size(); ++i)
      if (w[i].id != expect[i].first || w[i].label != expect[i].second) return "content mismatch at " + std::to_string(i);
    return {};
  });
  EXPECT_EQ(failure, "");
}

TEST(SubmitLabels, WithinBatchLastLabelWins) {
  auto m = build(tiny_cnn());
  auto r = submit_labels(m, {example(1, L::Relevant), example(2, L::Relevant), example(1, L::NotRelevant)});
  EXPECT_EQ(r.accepted, 2u);
  EXPECT_EQ(m.n_trained(), 2u);
  EXPECT_EQ(m.window().ids(), (std::vector<std::string>{"d2", "d1"}));
  EXPECT_EQ(m.window()[1].label, L::NotRelevant);
}

TEST(SubmitLabels, DegenerateExamples) {
  auto m = build(tiny_cnn());
  auto junk = make_example("junk", "@nobody http://x.y zzz", L::Relevant, table(), 6);
  ASSERT_TRUE(junk.matrix.degenerate());
  auto r = submit_labels(m, {junk, example(3)});
  EXPECT_EQ(r.rejected_ids, (std::vector<std::string>{"junk"}));
  EXPECT_EQ(r.accepted, 1u);
  try {
    submit_labels(m, {junk});
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.kind(), TrainingError::Kind::AllDegenerate);
  }
  EXPECT_EQ(m.n_trained(), 1u);
}

TEST(SubmitLabels, EmptyAndOversizeBatches) {
  auto m = build(tiny_cnn(), 5);
  try {
    submit_labels(m, {});
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.kind(), TrainingError::Kind::EmptyBatch);
  }
  try {
    submit_labels(m, range(0, 6));
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.kind(), TrainingError::Kind::BatchTooLarge);
  }
  EXPECT_EQ(m.n_trained(), 0u);
  EXPECT_TRUE(m.window().empty());
}

TEST(SubmitLabels, MiniBatchesPerEpoch) {
  auto hp = tiny_cnn();
  hp.batch_size = 4;
  hp.epochs = 3;
  auto m = build(hp);
  auto r = submit_labels(m, range(0, 10));
  EXPECT_EQ(r.loss_trace.size(), 9u);  // ceil(10 / 4) steps per epoch
  EXPECT_EQ(m.optimizer_state().step, 9u);
  for (double l : r.loss_trace) EXPECT_TRUE(std::isfinite(l));
}

TEST(SubmitLabels, TrainingChangesWeightsAndIsSeeded) {
  auto a = build(tiny_cnn()), b = build(tiny_cnn());
  const auto before = *a.parameters()[0];
  submit_labels(a, range(0, 10));
  submit_labels(b, range(0, 10));
  EXPECT_NE(*a.parameters()[0], before);
  EXPECT_EQ(*a.parameters()[0], *b.parameters()[0]);
}

TEST(PredictBatch, TieBreakAndDegenerate) {
  LabelDistribution d;
  d.probs = {0.5, 0.3, 0.2};
  EXPECT_EQ(d.argmax(), L::Relevant);
  EXPECT_EQ(LabelDistribution::uniform().argmax(), L::Relevant);
  d.probs = {0.1, 0.2, 0.7};
  EXPECT_EQ(d.argmax(), L::CantDecide);
  d.probs = {0.2, 0.4, 0.4};
  EXPECT_EQ(d.argmax(), L::NotRelevant);

  auto m = build(tiny_cnn());
  auto out = predict_batch(m, {"w1 w2", "", "@only http://a.b"}, table());
  ASSERT_EQ(out.size(), 3u);
  EXPECT_FALSE(out[0].diagnostic);
  for (int i : {1, 2}) {
    EXPECT_EQ(out[i].label, L::CantDecide);
    EXPECT_EQ(out[i].distribution, LabelDistribution::uniform());
    EXPECT_TRUE(out[i].diagnostic);
  }
}

TEST(PredictBatch, PipelineFailureBecomesCantDecide) {
  auto m = build(tiny_cnn());
  const auto wide = fixtures::random_table({"w1"}, 5, 1);  // wrong dimension for the model
  auto out = predict_batch(m, {"w1"}, wide);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].label, L::CantDecide);
  ASSERT_TRUE(out[0].diagnostic);
}

namespace {

// Two single-token texts: "alarm" is Relevant, "calm" is Not Relevant.
struct TwoToken {
  EmbeddingTable table{4};
  std::vector<LabeledExample> train, test;

  explicit TwoToken(std::uint64_t seed) {
    std::vector<float> a{1, 0, 0, 0}, c{0, 1, 0, 0};
    table.add("alarm", a);
    table.add("calm", c);
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 200; ++i) {
      const bool rel = rng() & 1;
      auto ex = make_example("x" + std::to_string(i), rel ? "alarm" : "calm", rel ? L::Relevant : L::NotRelevant,
                             table, 8, ExampleSource::Dataset);
      (i < 100 ? train : test).push_back(std::move(ex));
    }
  }
};

}  // namespace

TEST(SimulateStream, TwoTokenCorpusConvergesQuickly) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    TwoToken data(seed);
    auto hp = default_hyperparameters(ModelType::Cnn);
    hp.embedding_dim = 4;
    hp.max_len = 8;
    hp.seed = seed;
    hp.learning_rate = 0.1;
    auto m = build(hp);
    std::vector<LabeledExample> three(data.train.begin(), data.train.begin() + 30);
    auto r = simulate_stream(m, three, data.test);
    ASSERT_EQ(r.iterations.size(), 3u);
    double best = 0;
    for (const auto& it : r.iterations) best = std::max(best, it.scores.f1);
    EXPECT_GE(best, 0.95) << "seed " << seed;
  }
}

TEST(SimulateStream, SingleDelivery) {
  TwoToken data(3);
  auto hp = default_hyperparameters(ModelType::Cnn);
  hp.embedding_dim = 4;
  hp.max_len = 8;
  auto m = build(hp);
  std::vector<LabeledExample> ten(data.train.begin(), data.train.begin() + 10);
  auto r = simulate_stream(m, ten, data.test);
  EXPECT_EQ(r.iterations.size(), 1u);
  EXPECT_FALSE(r.trend);
  EXPECT_EQ(r.average, r.iterations[0].scores);
  EXPECT_EQ(r.iterations[0].n_tweets, 10u);
}

TEST(SimulateStream, IterationCountIsFloor) {
  TwoToken data(4);
  auto hp = default_hyperparameters(ModelType::Cnn);
  hp.embedding_dim = 4;
  hp.max_len = 8;
  auto m = build(hp);
  std::vector<LabeledExample> some(data.train.begin(), data.train.begin() + 37);
  auto r = simulate_stream(m, some, data.test);
  EXPECT_EQ(r.iterations.size(), 3u);
  EXPECT_EQ(m.n_trained(), 30u);
  ASSERT_TRUE(r.trend);
}

TEST(SimulateStream, RejectsOverlapAndEmptySets) {
  TwoToken data(5);
  auto hp = default_hyperparameters(ModelType::Cnn);
  hp.embedding_dim = 4;
  hp.max_len = 8;
  auto m = build(hp);
  auto test = data.test;
  test.push_back(data.train[3]);
  EXPECT_THROW(simulate_stream(m, data.train, test), std::invalid_argument);
  EXPECT_THROW(simulate_stream(m, {}, data.test), std::invalid_argument);
  EXPECT_THROW(simulate_stream(m, data.train, {}), std::invalid_argument);
  std::vector<LabeledExample> nine(data.train.begin(), data.train.begin() + 9);
  EXPECT_THROW(simulate_stream(m, nine, data.test), std::invalid_argument);
  EXPECT_EQ(m.n_trained(), 0u);
}

TEST(SimulateStream, BitReproducible) {
  auto run = [] {
    TwoToken data(6);
    auto hp = default_hyperparameters(ModelType::Lstm);
    hp.embedding_dim = 4;
    hp.max_len = 8;
    hp.hidden_size = 6;
    hp.epochs = 2;
    auto m = build(hp);
    SimulationOptions opt;
    opt.measure_cpu = false;
    auto r = simulate_stream(m, data.train, data.test, opt);
    std::vector<double> trace;
    for (const auto& it : r.iterations) trace.insert(trace.end(), {it.scores.precision, it.scores.f1, it.mean_loss});
    trace.push_back(r.trend->a);
    return trace;
  };
  EXPECT_EQ(run(), run());
}

TEST(SimulateStream, AllDegenerateChunkIsSkipped) {
  TwoToken data(7);
  auto hp = default_hyperparameters(ModelType::Cnn);
  hp.embedding_dim = 4;
  hp.max_len = 8;
  auto m = build(hp);
  std::vector<LabeledExample> train;
  for (int i = 0; i < 10; ++i)
    train.push_back(make_example("j" + std::to_string(i), "nothing here", L::Relevant, data.table, 8));
  train.insert(train.end(), data.train.begin(), data.train.begin() + 10);
  std::vector<std::size_t> seen;
  SimulationOptions opt;
  opt.on_iteration = [&](const IterationResult& it) { seen.push_back(it.iteration); };
  auto r = simulate_stream(m, train, data.test, opt);
  ASSERT_EQ(r.iterations.size(), 2u);
  EXPECT_FALSE(r.iterations[0].trained);
  EXPECT_TRUE(r.iterations[1].trained);
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2}));
}

TEST(Evaluate, DegenerateTestTextsCountAsCantDecide) {
  TwoToken data(8);
  auto hp = default_hyperparameters(ModelType::Cnn);
  hp.embedding_dim = 4;
  hp.max_len = 8;
  auto m = build(hp);
  std::vector<LabeledExample> test{make_example("q", "???", L::Relevant, data.table, 8)};
  auto s = evaluate(m, test, ScoreMode::BinaryRelevant);
  EXPECT_EQ(s, ScoreTriple{});
}
